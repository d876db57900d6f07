#pragma once

#include "tssg/association.hpp"
#include "tssg/commands.hpp"
#include "tssg/config.hpp"
#include "tssg/errors.hpp"
#include "tssg/estimation.hpp"
#include "tssg/grid_model.hpp"
#include "tssg/hmm_benchmark.hpp"
#include "tssg/iekf_tracker.hpp"
#include "tssg/io.hpp"
#include "tssg/kf_trackers.hpp"
#include "tssg/linalg.hpp"
#include "tssg/metrics.hpp"
#include "tssg/monte_carlo.hpp"
#include "tssg/nnls_solver.hpp"
#include "tssg/pipeline.hpp"
#include "tssg/seeds.hpp"
#include "tssg/sim.hpp"
#include "tssg/trackers.hpp"
