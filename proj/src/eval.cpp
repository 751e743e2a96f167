#include "plume/eval.hpp"

#include "plume/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <stdexcept>

namespace plume {

RocCurve roc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw std::invalid_argument("scores and truth differ in length");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("ROC scores must be finite");
  RocCurve curve;
  for (auto t : truth) (t ? curve.positives : curve.negatives) += 1;
  if (curve.positives == 0 || curve.negatives == 0)
    throw std::invalid_argument("ROC needs at least one positive and one negative pixel");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Sweep thresholds from high to low. Area is accumulated in integer units
  // of 1/(2PN): each group adds fp_group * (2 tp_before + tp_group).
  const double p = static_cast<double>(curve.positives);
  const double n = static_cast<double>(curve.negatives);
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  unsigned long long tp = 0;
  unsigned long long fp = 0;
  unsigned long long area2 = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double threshold = scores[order[k]];
    unsigned long long gtp = 0;
    unsigned long long gfp = 0;
    while (k < order.size() && scores[order[k]] == threshold) {
      (truth[order[k]] ? gtp : gfp) += 1;
      ++k;
    }
    area2 += gfp * (2 * tp + gtp);
    tp += gtp;
    fp += gfp;
    curve.points.push_back({threshold, static_cast<double>(fp) / n, static_cast<double>(tp) / p});
  }
  curve.auc = static_cast<double>(area2) / (2.0 * p * n);
  return curve;
}

RocCurve roc(const ScoreMap& scores, const PlumeMask& truth) {
  if (scores.rows() != truth.rows() || scores.cols() != truth.cols())
    throw std::invalid_argument("score map and mask differ in shape");
  return roc(std::span<const double>(scores.values()), std::span<const std::uint8_t>(truth.values()));
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> truth) { return roc(scores, truth).auc; }

std::map<int, GroupSummary> group_summary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  std::map<int, std::vector<double>> groups;
  for (std::size_t i = 0; i < scores.size(); ++i) groups[labels[i]].push_back(scores[i]);
  std::map<int, GroupSummary> out;
  for (auto& [label, values] : groups) {
    std::sort(values.begin(), values.end());
    GroupSummary g;
    g.count = values.size();
    g.q25 = quantile_sorted(values, 0.25);
    g.median = quantile_sorted(values, 0.5);
    g.q75 = quantile_sorted(values, 0.75);
    const double iqr = g.q75 - g.q25;
    const double lo = g.q25 - 1.5 * iqr;
    const double hi = g.q75 + 1.5 * iqr;
    g.whisker_low = g.q25;
    g.whisker_high = g.q75;
    for (double v : values) {
      if (v < lo || v > hi) {
        ++g.outliers;
        continue;
      }
      g.whisker_low = std::min(g.whisker_low, v);
      g.whisker_high = std::max(g.whisker_high, v);
    }
    out.emplace(label, g);
  }
  return out;
}

void write_roc_csv(const RocCurve& curve, std::ostream& out) {
  out << "threshold,fpr,tpr\n" << std::setprecision(17);
  for (const auto& pt : curve.points) {
    if (std::isinf(pt.threshold)) {
      out << "inf";
    } else {
      out << pt.threshold;
    }
    out << ',' << pt.fpr << ',' << pt.tpr << '\n';
  }
}

nlohmann::json to_json(const RocCurve& curve) {
  return {{"auc", curve.auc},
          {"positives", curve.positives},
          {"negatives", curve.negatives},
          {"points", curve.points.size()},
          {"auc_convention", "Mann-Whitney, ties count one half"}};
}

nlohmann::json to_json(const GroupSummary& s) {
  return {{"count", s.count},         {"q25", s.q25},
          {"median", s.median},       {"q75", s.q75},
          {"whisker_low", s.whisker_low}, {"whisker_high", s.whisker_high},
          {"outliers", s.outliers},   {"quantile_convention", "linear interpolation at q(n-1)"}};
}

}  // namespace plume
