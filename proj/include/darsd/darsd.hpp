#pragma once

#include "darsd/checkpoint.hpp"
#include "darsd/config.hpp"
#include "darsd/contrastive.hpp"
#include "darsd/data.hpp"
#include "darsd/gradcheck.hpp"
#include "darsd/gradcheck_suite.hpp"
#include "darsd/keyvalue.hpp"
#include "darsd/lcib.hpp"
#include "darsd/metrics.hpp"
#include "darsd/networks.hpp"
#include "darsd/ops.hpp"
#include "darsd/optim.hpp"
#include "darsd/ppgce.hpp"
#include "darsd/rng.hpp"
#include "darsd/tensor.hpp"
#include "darsd/train.hpp"
