#pragma once

#include "isc/analysis.hpp"
#include "isc/config.hpp"
#include "isc/controllers.hpp"
#include "isc/dither.hpp"
#include "isc/errors.hpp"
#include "isc/experiments.hpp"
#include "isc/hybrid.hpp"
#include "isc/invariants.hpp"
#include "isc/parallel.hpp"
#include "isc/performance.hpp"
#include "isc/plant.hpp"
#include "isc/report.hpp"
