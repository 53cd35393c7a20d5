#pragma once

#include "mric/augment.hpp"
#include "mric/dataset.hpp"
#include "mric/image.hpp"
#include "mric/layers.hpp"
#include "mric/metrics.hpp"
#include "mric/model.hpp"
#include "mric/ops.hpp"
#include "mric/report.hpp"
#include "mric/tape.hpp"
#include "mric/tensor.hpp"
#include "mric/train.hpp"
#include "mric/weights.hpp"
