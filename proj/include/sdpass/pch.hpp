#pragma once

// Port-controlled Hamiltonian systems x' = (J - R) grad H + g u, IDA-PBC
// closed loops, and the second-order discrete pcH form of the sampled
// closed loop:
//
//   x_{k+1} - x_k = delta (J_d^delta - R_d^delta) dgrad H_d|_x^{x + F_{d,[2]}(x)} + O(delta^3).

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdpass/disgrad.hpp"
#include "sdpass/errors.hpp"
#include "sdpass/field.hpp"
#include "sdpass/ode.hpp"
#include "sdpass/vfcalc.hpp"

namespace sdpass {

namespace detail {

/// (J - R)(X) grad H(X) on jets or doubles.
inline VectorField hamiltonian_drift(const MatrixField& J, const MatrixField& R, const ScalarField& H) {
  const int n = H.arity();
  require_arity(J.arity(), n, "interconnection matrix");
  require_arity(R.arity(), n, "dissipation matrix");
  return VectorField(
      n,
      [J, R, H, n](std::span<const double> x) {
        const Point p = to_point(x);
        const Point out = (J(p) - R(p)) * gradient(H, p);
        return std::vector<double>(out.data(), out.data() + n);
      },
      [J, R, H, n](std::span<const Jet> x) {
        const auto j = J(x);
        const auto r = R(x);
        const auto grad = gradient_jets(H, x);
        std::vector<Jet> out(static_cast<std::size_t>(n), Jet(0.0));
        for (int i = 0; i < n; ++i) {
          for (int k = 0; k < n; ++k) {
            const auto idx = static_cast<std::size_t>(i * n + k);
            out[static_cast<std::size_t>(i)] += (j[idx] - r[idx]) * grad[static_cast<std::size_t>(k)];
          }
        }
        return out;
      });
}

}  // namespace detail

class PortHamiltonianSystem {
public:
  PortHamiltonianSystem() = default;
  PortHamiltonianSystem(MatrixField J, MatrixField R, ScalarField H, VectorField g)
      : J_(std::move(J)), R_(std::move(R)), H_(std::move(H)), g_(std::move(g)) {
    require_arity(g_.arity(), H_.arity(), "pcH input field");
    drift_ = detail::hamiltonian_drift(J_, R_, H_);
  }

  int dimension() const noexcept { return H_.arity(); }
  const MatrixField& interconnection() const noexcept { return J_; }
  const MatrixField& dissipation() const noexcept { return R_; }
  const ScalarField& hamiltonian() const noexcept { return H_; }
  const VectorField& input() const noexcept { return g_; }
  /// (J - R) grad H as a field.
  const VectorField& drift() const noexcept { return drift_; }

  /// max(|J + J^T|, |R - R^T|, -lambda_min(R)) at x; <= tolerance means the structure holds.
  double structure_defect(const Point& x) const {
    const Matrix J = J_(x);
    const Matrix R = R_(x);
    const double skew = (J + J.transpose()).cwiseAbs().maxCoeff();
    const double sym = (R - R.transpose()).cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (R + R.transpose()));
    return std::max({skew, sym, -es.eigenvalues().minCoeff()});
  }

private:
  MatrixField J_;
  MatrixField R_;
  ScalarField H_;
  VectorField g_;
  VectorField drift_;
};

/// (J(x) - R(x)) grad H(x).
inline Point pch_drift(const PortHamiltonianSystem& sys, const Point& x) {
  require_arity(x.size(), sys.dimension(), "pcH drift");
  return (sys.interconnection()(x) - sys.dissipation()(x)) * gradient(sys.hamiltonian(), x);
}

/// Target closed loop f_d = (J_d - R_d) grad H_d with passive output y_d = g^T grad H_d.
struct IdaClosedLoop {
  MatrixField J;
  MatrixField R;
  ScalarField H;
  VectorField g;
  VectorField drift;
  ScalarField output;

  Matrix structure_matrix(const Point& x) const { return J(x) - R(x); }
};

inline IdaClosedLoop ida_closed_loop(MatrixField J_d, MatrixField R_d, ScalarField H_d, VectorField g) {
  require_arity(g.arity(), H_d.arity(), "IDA-PBC input field");
  IdaClosedLoop cl{std::move(J_d), std::move(R_d), std::move(H_d), std::move(g), {}, {}};
  cl.drift = detail::hamiltonian_drift(cl.J, cl.R, cl.H);
  cl.output = lie_derivative_field(cl.g, cl.H);
  return cl;
}

struct SampledPchStructure {
  Matrix M;       // M_d^delta = J_d^delta - R_d^delta
  Matrix J;       // skew part
  Matrix R;       // negated symmetric part
  Point F2;       // F_{d,[2]}^delta(x)
  double condition = 1.0;
};

/// max(1, sigma_max) / sigma_min of I + (delta/2) Hess H_d A M_d above this rejects the inversion.
inline constexpr double kMaxStructureCondition = 1e12;

/// Second-order discrete pcH structure of the sampled closed loop at x.
inline SampledPchStructure sampled_pch_structure(const IdaClosedLoop& cl, double delta, const Point& x) {
  const int n = cl.H.arity();
  require_arity(x.size(), n, "sampled pcH structure");
  const Matrix I = Matrix::Identity(n, n);
  const Matrix M = cl.structure_matrix(x);
  const Matrix A = I + 0.5 * delta * jacobian(cl.drift, x);
  const Matrix Hess = hessian(cl.H, x);
  const Matrix AM = A * M;
  const Matrix Q = I + 0.5 * delta * Hess * AM;

  Eigen::JacobiSVD<Matrix> svd(Q);
  const auto& sv = svd.singularValues();
  // Q = I + O(delta) is dimensionless, so a uniformly shrinking Q (a scaled
  // rotation keeps sv(0)/sv(n-1) = 1) is caught by measuring against max(1, sv(0)).
  const double smin = sv(sv.size() - 1);
  const double cond = smin > 0.0 ? std::max(1.0, sv(0)) / smin : INFINITY;
  if (!(cond <= kMaxStructureCondition)) {
    throw SingularMatrixError("discrete pcH structure: I + (delta/2) Hess H_d A M_d is singular", cond);
  }
  SampledPchStructure s;
  s.condition = cond;
  s.M = Q.transpose().partialPivLu().solve(AM.transpose()).transpose();
  s.J = 0.5 * (s.M - s.M.transpose());
  s.R = -0.5 * (s.M + s.M.transpose());
  s.F2 = delta * AM * gradient(cl.H, x);
  return s;
}

/// |F_{d,[2]}(x) - delta M_d^delta(x) dgrad H_d|_x^{x + F_{d,[2]}(x)}|.
inline double pch_residual(const IdaClosedLoop& cl, double delta, const Point& x, const DiscreteGradient& dg) {
  const auto s = sampled_pch_structure(cl, delta, x);
  return (s.F2 - delta * s.M * dg(x, x + s.F2)).norm();
}

inline double pch_residual(const IdaClosedLoop& cl, double delta, const Point& x) {
  return pch_residual(cl, delta, x, DiscreteGradient::quadrature(cl.H));
}

/// Diagnostic: the same residual with the exact closed-loop flow increment in place of F_{d,[2]}.
inline double pch_flow_residual(const IdaClosedLoop& cl, double delta, const Point& x, const DiscreteGradient& dg,
                                const OdeOptions& ode = {}) {
  const auto s = sampled_pch_structure(cl, delta, x);
  std::vector<double> y0(x.data(), x.data() + x.size());
  auto rhs = [&cl](double, const std::vector<double>& y) { return cl.drift(std::span<const double>(y)); };
  const Point next = to_point(integrate(rhs, std::move(y0), 0.0, delta, ode));
  const Point inc = next - x;
  return (inc - delta * s.M * dg(x, next)).norm();
}

}  // namespace sdpass
