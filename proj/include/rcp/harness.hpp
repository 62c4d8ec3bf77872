#pragma once

#include "rcp/harness/bounds.hpp"
#include "rcp/harness/config.hpp"
#include "rcp/harness/parallel.hpp"
#include "rcp/harness/pipeline.hpp"
#include "rcp/harness/results.hpp"
#include "rcp/harness/runners.hpp"
