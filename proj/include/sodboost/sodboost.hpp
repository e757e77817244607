#pragma once

// Umbrella header for the whole library: tensor engine, network modules,
// losses, metrics, data pipeline, and the training harness.

#include "sodboost/common.hpp"
#include "sodboost/conv.hpp"
#include "sodboost/data/augment.hpp"
#include "sodboost/data/dataset.hpp"
#include "sodboost/data/netpbm.hpp"
#include "sodboost/data/synthetic.hpp"
#include "sodboost/gradcheck.hpp"
#include "sodboost/losses.hpp"
#include "sodboost/metrics.hpp"
#include "sodboost/metrics_io.hpp"
#include "sodboost/nn/model.hpp"
#include "sodboost/norm.hpp"
#include "sodboost/ops.hpp"
#include "sodboost/resample.hpp"
#include "sodboost/rng.hpp"
#include "sodboost/sgd.hpp"
#include "sodboost/tensor.hpp"
#include "sodboost/train/ablation.hpp"
#include "sodboost/train/checkpoint.hpp"
#include "sodboost/train/config.hpp"
#include "sodboost/train/schedule.hpp"
#include "sodboost/train/trainer.hpp"
#include "sodboost/window.hpp"
