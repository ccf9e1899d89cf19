#pragma once

#include "etvbf/numerics.hpp"
#include "etvbf/distributions.hpp"
#include "etvbf/model.hpp"
#include "etvbf/trigger.hpp"
#include "etvbf/filter.hpp"
#include "etvbf/baselines.hpp"
#include "etvbf/harness.hpp"
