#pragma once

#include "panelardl/error.hpp"
#include "panelardl/parallel.hpp"
#include "panelardl/quantile.hpp"
#include "panelardl/panel_io.hpp"
#include "panelardl/debt_capacity.hpp"
#include "panelardl/design.hpp"
#include "panelardl/estimator.hpp"
#include "panelardl/threshold_search.hpp"
#include "panelardl/effects.hpp"
#include "panelardl/jackknife.hpp"
#include "panelardl/dgp_sim.hpp"
#include "panelardl/report.hpp"
