#pragma once

#include "stqr/config.hpp"
#include "stqr/copula.hpp"
#include "stqr/data.hpp"
#include "stqr/error.hpp"
#include "stqr/exploratory.hpp"
#include "stqr/harmonics.hpp"
#include "stqr/linalg.hpp"
#include "stqr/mcmc.hpp"
#include "stqr/normal.hpp"
#include "stqr/quantile_basis.hpp"
#include "stqr/report.hpp"
#include "stqr/sim_study.hpp"
#include "stqr/spatial_gp.hpp"
#include "stqr/variance_model.hpp"
