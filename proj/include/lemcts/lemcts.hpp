#pragma once

// Umbrella header: process-level ensemble search over reasoning steps.

#include "lemcts/answer.hpp"
#include "lemcts/baselines.hpp"
#include "lemcts/config.hpp"
#include "lemcts/engine.hpp"
#include "lemcts/generator.hpp"
#include "lemcts/harness.hpp"
#include "lemcts/oracle.hpp"
#include "lemcts/prompt.hpp"
#include "lemcts/reward.hpp"
#include "lemcts/tree.hpp"
#include "lemcts/types.hpp"
#include "lemcts/util.hpp"
