#pragma once

#include "hadrl/action_algebra.hpp"
#include "hadrl/agents.hpp"
#include "hadrl/errors.hpp"
#include "hadrl/nn_core.hpp"
#include "hadrl/oracle.hpp"
#include "hadrl/pentest_env.hpp"
#include "hadrl/scenario.hpp"
#include "hadrl/trainer.hpp"
