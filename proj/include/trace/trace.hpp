#pragma once

#include "trace/core.hpp"
#include "trace/world_model.hpp"
#include "trace/generators.hpp"
#include "trace/critic.hpp"
#include "trace/engine.hpp"
#include "trace/oracle.hpp"
#include "trace/scenarios.hpp"
#include "trace/serialize.hpp"
#include "trace/baselines.hpp"
#include "trace/report.hpp"
#include "trace/external_generator.hpp"
