#pragma once

#include "rcp/conformal.hpp"
#include "rcp/crcp.hpp"
#include "rcp/error.hpp"
#include "rcp/ingest.hpp"
#include "rcp/noise_model.hpp"
#include "rcp/random.hpp"
#include "rcp/stats_core.hpp"
#include "rcp/synth.hpp"
#include "rcp/theory_bounds.hpp"
