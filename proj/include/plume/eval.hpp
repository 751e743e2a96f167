#pragma once

// ROC curves against plume masks and per-label boxplot summaries.

#include "plume/cube_io.hpp"

#include <json.hpp>

#include <map>
#include <ostream>
#include <span>
#include <vector>

namespace plume {

struct RocPoint {
  double threshold;  // score >= threshold counts as detected
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // starts at (0,0), ends at (1,1)
  double auc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

RocCurve roc(std::span<const double> scores, std::span<const std::uint8_t> truth);
RocCurve roc(const ScoreMap& scores, const PlumeMask& truth);

// AUC alone (Mann-Whitney with ties counted one half).
double auc(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct GroupSummary {
  std::size_t count = 0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double whisker_low = 0.0;   // most extreme values within 1.5 IQR of the box
  double whisker_high = 0.0;
  std::size_t outliers = 0;
};

// Quantiles by linear interpolation at position q (n - 1).
std::map<int, GroupSummary> group_summary(std::span<const double> scores, std::span<const int> labels);

void write_roc_csv(const RocCurve& curve, std::ostream& out);
nlohmann::json to_json(const RocCurve& curve);
nlohmann::json to_json(const GroupSummary& summary);

}  // namespace plume
