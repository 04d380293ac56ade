#pragma once

#include "segstat/config.hpp"
#include "segstat/csv.hpp"
#include "segstat/ensemble.hpp"
#include "segstat/error.hpp"
#include "segstat/image.hpp"
#include "segstat/mask_core.hpp"
#include "segstat/metrics.hpp"
#include "segstat/parallel.hpp"
#include "segstat/pipeline.hpp"
#include "segstat/random.hpp"
#include "segstat/splits.hpp"
#include "segstat/stats.hpp"
