#pragma once

// Umbrella header for the full-duplex self-interference cancellation toolkit.

#include "fdsim/analytic.hpp"
#include "fdsim/cancellers.hpp"
#include "fdsim/config.hpp"
#include "fdsim/core.hpp"
#include "fdsim/estimators.hpp"
#include "fdsim/montecarlo.hpp"
#include "fdsim/phasenoise.hpp"
#include "fdsim/rfchain.hpp"
#include "fdsim/rng.hpp"
