#pragma once

#include "lbft/adversary.hpp"
#include "lbft/analysis.hpp"
#include "lbft/block_tree.hpp"
#include "lbft/core.hpp"
#include "lbft/lottery.hpp"
#include "lbft/protocol.hpp"
#include "lbft/scenario.hpp"
#include "lbft/simnet.hpp"
#include "lbft/sweep.hpp"
#include "lbft/trace.hpp"
#include "lbft/trace_io.hpp"
