#pragma once

// Umbrella header.

#include "timeroc/error.hpp"
#include "timeroc/spline_basis.hpp"
#include "timeroc/terms.hpp"
#include "timeroc/optimize.hpp"
#include "timeroc/quadrature.hpp"
#include "timeroc/gam.hpp"
#include "timeroc/pam.hpp"
#include "timeroc/location_scale.hpp"
#include "timeroc/parallel.hpp"
#include "timeroc/roc.hpp"
#include "timeroc/simulation.hpp"
#include "timeroc/io.hpp"
