#pragma once

// Umbrella header for the library (the CLI layer lives in cli.hpp).

#include "commands.hpp"
#include "config.hpp"
#include "data.hpp"
#include "dbn.hpp"
#include "geometry.hpp"
#include "metrics.hpp"
#include "model_io.hpp"
#include "oracle.hpp"
#include "ssrbm.hpp"
#include "training.hpp"
#include "upper.hpp"
