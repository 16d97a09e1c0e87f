#pragma once

#include "vodsim/core_model.hpp"
#include "vodsim/allocation_engine.hpp"
#include "vodsim/topology_router.hpp"
#include "vodsim/profile_agent.hpp"
#include "vodsim/metrics.hpp"
#include "vodsim/simulator.hpp"
#include "vodsim/reports.hpp"
