// Umbrella header.
#pragma once

#include "acerac/checkpoint.hpp"
#include "acerac/environments.hpp"
#include "acerac/gaussian_density.hpp"
#include "acerac/harness.hpp"
#include "acerac/learner.hpp"
#include "acerac/mlp.hpp"
#include "acerac/noise_process.hpp"
#include "acerac/replay_memory.hpp"
#include "acerac/types.hpp"
