#pragma once

#include "specae/bench.hpp"
#include "specae/checkpoint.hpp"
#include "specae/config.hpp"
#include "specae/embedding.hpp"
#include "specae/errors.hpp"
#include "specae/experiment.hpp"
#include "specae/gmm.hpp"
#include "specae/graph.hpp"
#include "specae/layers.hpp"
#include "specae/metrics.hpp"
#include "specae/model.hpp"
#include "specae/optim.hpp"
#include "specae/tensor.hpp"
#include "specae/trainer.hpp"
