#pragma once

#include "axislab/error.hpp"
#include "axislab/rng.hpp"
#include "axislab/parallel.hpp"
#include "axislab/stats.hpp"
#include "axislab/core_geometry.hpp"
#include "axislab/eval_metrics.hpp"
#include "axislab/head.hpp"
#include "axislab/cell.hpp"
#include "axislab/predictor.hpp"
#include "axislab/intervention.hpp"
#include "axislab/probes.hpp"
#include "axislab/manifest.hpp"
#include "axislab/synth_bench.hpp"
#include "axislab/data_io.hpp"
#include "axislab/report.hpp"
