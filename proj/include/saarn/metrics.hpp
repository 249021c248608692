#pragma once

// Referring-segmentation metrics: per-sample IoU, mIoU (mean of per-sample
// IoU), oIoU (total intersection over total union) and Precision@t (share of
// samples whose IoU is strictly above t).

#include <algorithm>
#include <array>
#include <cstdint>
#include <iomanip>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "saarn/errors.hpp"

namespace saarn::metrics {

inline constexpr std::array<double, 5> kPrecisionThresholds = {0.5, 0.6, 0.7, 0.8, 0.9};

struct Overlap {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;

  // Both masks empty counts as a perfect match.
  double iou() const {
    return union_ == 0 ? 1.0 : static_cast<double>(intersection) / static_cast<double>(union_);
  }
};

inline Overlap overlap(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size())
    throw ShapeError("iou: prediction has " + std::to_string(pred.size()) + " pixels, ground truth " +
                     std::to_string(gt.size()));
  Overlap o;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    o.intersection += (p && g) ? 1 : 0;
    o.union_ += (p || g) ? 1 : 0;
  }
  return o;
}

inline double iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
  return overlap(pred, gt).iou();
}

struct MetricsReport {
  std::map<double, double> p_at;
  double oiou = 0.0;
  double miou = 0.0;
  std::size_t n_samples = 0;
  std::vector<double> per_sample_iou;
};

// Order-independent accumulator; shards can be merged in any order.
class MetricsAccumulator {
 public:
  void add(const Overlap& o) {
    total_.intersection += o.intersection;
    total_.union_ += o.union_;
    ious_.push_back(o.iou());
  }

  void add(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
    add(overlap(pred, gt));
  }

  void merge(const MetricsAccumulator& other) {
    total_.intersection += other.total_.intersection;
    total_.union_ += other.total_.union_;
    ious_.insert(ious_.end(), other.ious_.begin(), other.ious_.end());
  }

  std::size_t size() const { return ious_.size(); }

  MetricsReport report() const {
    if (ious_.empty()) throw InvalidInputError("metrics: no samples");
    MetricsReport r;
    r.n_samples = ious_.size();
    r.per_sample_iou = ious_;
    double sum = 0.0;
    for (double v : ious_) sum += v;
    r.miou = sum / static_cast<double>(ious_.size());
    r.oiou = total_.iou();
    for (double t : kPrecisionThresholds) {
      std::size_t hits = 0;
      for (double v : ious_) hits += v > t ? 1 : 0;
      r.p_at[t] = static_cast<double>(hits) / static_cast<double>(ious_.size());
    }
    return r;
  }

 private:
  Overlap total_;
  std::vector<double> ious_;
};

struct MaskPair {
  std::span<const std::uint8_t> pred;
  std::span<const std::uint8_t> gt;
};

inline MetricsReport compute_report(std::span<const MaskPair> pairs) {
  if (pairs.empty()) throw InvalidInputError("compute_report: empty sequence");
  MetricsAccumulator acc;
  for (const auto& p : pairs) acc.add(p.pred, p.gt);
  return acc.report();
}

inline std::string threshold_key(double t) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << t;
  return os.str();
}

inline nlohmann::ordered_json to_json(const MetricsReport& r, bool with_per_sample = true) {
  nlohmann::ordered_json p_at = nlohmann::ordered_json::object();
  for (const auto& [t, v] : r.p_at) p_at[threshold_key(t)] = v;
  nlohmann::ordered_json j{{"p_at", p_at}, {"oiou", r.oiou}, {"miou", r.miou},
                           {"n_samples", r.n_samples}};
  if (with_per_sample) j["per_sample_iou"] = r.per_sample_iou;
  return j;
}

inline MetricsReport report_from_json(const nlohmann::ordered_json& j) {
  MetricsReport r;
  for (const auto& [k, v] : j.at("p_at").items()) r.p_at[std::stod(k)] = v.get<double>();
  r.oiou = j.at("oiou").get<double>();
  r.miou = j.at("miou").get<double>();
  r.n_samples = j.at("n_samples").get<std::size_t>();
  if (j.contains("per_sample_iou")) r.per_sample_iou = j.at("per_sample_iou").get<std::vector<double>>();
  return r;
}

// Plain-text table in the column order P@0.5 .. P@0.9, oIoU, mIoU, values
// in percent.
inline std::string render_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::ostringstream os;
  std::size_t label_width = 5;
  for (const auto& [label, _] : rows) label_width = std::max(label_width, label.size());
  os << std::left << std::setw(static_cast<int>(label_width)) << "Split";
  for (double t : kPrecisionThresholds) os << std::right << std::setw(9) << ("P@" + threshold_key(t));
  os << std::setw(9) << "oIoU" << std::setw(9) << "mIoU" << std::setw(8) << "N" << '\n';
  for (const auto& [label, r] : rows) {
    os << std::left << std::setw(static_cast<int>(label_width)) << label << std::right << std::fixed
       << std::setprecision(2);
    for (double t : kPrecisionThresholds) os << std::setw(9) << 100.0 * r.p_at.at(t);
    os << std::setw(9) << 100.0 * r.oiou << std::setw(9) << 100.0 * r.miou << std::setw(8)
       << r.n_samples << '\n';
  }
  return os.str();
}

}  // namespace saarn::metrics
