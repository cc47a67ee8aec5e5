#pragma once

#include "cardport/backtest.hpp"
#include "cardport/frontier.hpp"
#include "cardport/lam.hpp"
#include "cardport/linalg.hpp"
#include "cardport/lp.hpp"
#include "cardport/market_data.hpp"
#include "cardport/milp.hpp"
#include "cardport/mv.hpp"
#include "cardport/oracle.hpp"
#include "cardport/portfolio.hpp"
