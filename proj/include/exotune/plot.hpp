#pragma once

#include <string>
#include <vector>

#include "exotune/datastore.hpp"
#include "exotune/device_sim.hpp"

namespace exotune {

/// Per-step mean and normal-approximation 95% interval across traces.
/// Traces may differ in length; step t uses every trace that reaches t.
/// A step seen by a single trace gets a zero-width band.
struct CiBand {
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::size_t> count;
};

CiBand confidence_band(const std::vector<std::vector<double>>& traces, double z = 1.96);

/// Angle / biceps effort / triceps effort traces of every episode that ran
/// with one static threshold pair.
struct CellTraces {
  ThresholdAction action;
  std::vector<std::vector<double>> angle;
  std::vector<std::vector<double>> effort_biceps;
  std::vector<std::vector<double>> effort_triceps;
};

/// Groups episodes by the thresholds of their first step, sorted by
/// (biceps, triceps).
std::vector<CellTraces> group_by_cell(const Dataset& dataset);

struct ThresholdTraceRow {
  std::int64_t episode = 0;
  std::int64_t step = 0;
  double angle = 0.0;
  double effort_biceps = 0.0;
  double effort_triceps = 0.0;
  double th_b = 0.0;
  double th_t = 0.0;
};

std::string cell_traces_svg(const std::vector<CellTraces>& cells);
std::string loss_curve_svg(const std::vector<double>& losses, std::size_t window = 100);
std::string oracle_heatmap_svg(const std::vector<OracleCell>& cells);
std::string thresholds_svg(const std::vector<ThresholdTraceRow>& rows);

}  // namespace exotune
