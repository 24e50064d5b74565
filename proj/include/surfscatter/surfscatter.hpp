#pragma once

// Umbrella header for the whole library.

#include "surfscatter/cloud_io.hpp"
#include "surfscatter/config.hpp"
#include "surfscatter/error.hpp"
#include "surfscatter/evaluation/metrics.hpp"
#include "surfscatter/evaluation/protocol.hpp"
#include "surfscatter/evaluation/scatter_map.hpp"
#include "surfscatter/features.hpp"
#include "surfscatter/learners/decision_tree.hpp"
#include "surfscatter/learners/gradient_boosting.hpp"
#include "surfscatter/learners/mlp.hpp"
#include "surfscatter/learners/model.hpp"
#include "surfscatter/learners/random_forest.hpp"
#include "surfscatter/learners/standardizer.hpp"
#include "surfscatter/matrix.hpp"
#include "surfscatter/parallel.hpp"
#include "surfscatter/patching.hpp"
#include "surfscatter/random.hpp"
#include "surfscatter/report.hpp"
#include "surfscatter/synth.hpp"
#include "surfscatter/types.hpp"
