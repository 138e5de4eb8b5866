#pragma once

#include "sdpass/errors.hpp"
#include "sdpass/jet.hpp"
#include "sdpass/field.hpp"
#include "sdpass/vfcalc.hpp"
#include "sdpass/ode.hpp"
#include "sdpass/numerics.hpp"
#include "sdpass/disgrad.hpp"
#include "sdpass/sdmodel.hpp"
#include "sdpass/passivation.hpp"
#include "sdpass/pch.hpp"
#include "sdpass/sim.hpp"
#include "sdpass/verify.hpp"
