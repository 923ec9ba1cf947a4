#pragma once

#include "lppgate/calibration.hpp"
#include "lppgate/common.hpp"
#include "lppgate/cost_policy.hpp"
#include "lppgate/dataset.hpp"
#include "lppgate/evaluation.hpp"
#include "lppgate/features.hpp"
#include "lppgate/gateway.hpp"
#include "lppgate/pipeline.hpp"
#include "lppgate/ridge.hpp"
#include "lppgate/schema.hpp"
#include "lppgate/synth.hpp"
#include "lppgate/trainer.hpp"
