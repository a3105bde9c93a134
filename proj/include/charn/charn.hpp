#pragma once

// Umbrella header for the library (the CLI layer lives in charn/cli.hpp).

#include "charn/error.hpp"
#include "charn/rng.hpp"
#include "charn/normal.hpp"
#include "charn/model.hpp"
#include "charn/noise.hpp"
#include "charn/simulate.hpp"
#include "charn/lr_test.hpp"
#include "charn/power.hpp"
#include "charn/optimize.hpp"
#include "charn/estimation.hpp"
#include "charn/detect.hpp"
#include "charn/baselines.hpp"
#include "charn/montecarlo.hpp"
#include "charn/io.hpp"
