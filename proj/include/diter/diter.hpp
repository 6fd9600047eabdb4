#pragma once

#include "diter/core.hpp"
#include "diter/experiment.hpp"
#include "diter/graph.hpp"
#include "diter/metrics.hpp"
#include "diter/partition.hpp"
#include "diter/simulator.hpp"
#include "diter/trace.hpp"
