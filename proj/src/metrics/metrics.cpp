// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace otr::metrics {
namespace {

struct GtRef {
  double time;
  std::size_t index;
};

std::vector<std::size_t> rank_detections(std::span<const Detection> dets, ActionClass cls) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].cls == cls) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return dets[a].time < dets[b].time;
  });
  return order;
}

double pct(const std::optional<double>& v) { return v ? 100.0 * *v : 0.0; }

}  // namespace

MatchResult match_greedy(std::span<const Detection> dets, std::span<const GroundTruthAction> gts, double phi,
                         ActionClass cls) {
  MatchResult r;
  r.outcome.assign(dets.size(), Outcome::Ignored);
  r.gt_index.assign(dets.size(), std::nullopt);

  std::map<std::string, std::vector<GtRef>, std::less<>> by_video;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].cls != cls) continue;
    by_video[gts[i].video_id].push_back({gts[i].end_time, i});
    ++r.num_gt;
  }
  for (auto& [_, v] : by_video) {
    std::stable_sort(v.begin(), v.end(), [](const GtRef& a, const GtRef& b) { return a.time < b.time; });
  }
  std::vector<bool> used(gts.size(), false);

  r.ranked = rank_detections(dets, cls);
  for (std::size_t di : r.ranked) {
    const Detection& d = dets[di];
    std::optional<std::size_t> best;
    double best_dist = 0.0;
    if (auto it = by_video.find(d.video_id); it != by_video.end()) {
      const auto& v = it->second;
      auto lo = std::lower_bound(v.begin(), v.end(), d.time - phi,
                                 [](const GtRef& g, double t) { return g.time < t; });
      for (; lo != v.end() && lo->time <= d.time + phi; ++lo) {
        const double dist = std::fabs(d.time - lo->time);
        if (used[lo->index] || dist > phi) continue;
        if (!best || dist < best_dist) {
          best = lo->index;
          best_dist = dist;
        }
      }
    }
    if (best) {
      used[*best] = true;
      r.outcome[di] = Outcome::TruePositive;
      r.gt_index[di] = best;
      ++r.tp;
    } else {
      r.outcome[di] = Outcome::FalsePositive;
      ++r.fp;
    }
  }
  r.fn = r.num_gt - r.tp;
  return r;
}

std::optional<double> average_precision(std::span<const Outcome> ranked, std::size_t num_gt) {
  if (num_gt == 0) {
    if (ranked.empty()) return std::nullopt;
    return 0.0;
  }
  double sum = 0.0;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (ranked[k] != Outcome::TruePositive) continue;
    ++tp;
    sum += static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(num_gt);
}

ThresholdResult p_map(std::span<const Detection> dets, std::span<const GroundTruthAction> gts, double phi) {
  ThresholdResult res;
  res.phi = phi;
  double sum = 0.0;
  int scored = 0;
  for (std::size_t c = 0; c < kNumForeground; ++c) {
    const MatchResult m = match_greedy(dets, gts, phi, kForegroundClasses[c]);
    std::vector<Outcome> ranked(m.ranked.size());
    for (std::size_t k = 0; k < m.ranked.size(); ++k) ranked[k] = m.outcome[m.ranked[k]];
    res.class_ap[c] = average_precision(ranked, m.num_gt);
    res.tp += m.tp;
    res.fp += m.fp;
    res.fn += m.fn;
    if (res.class_ap[c]) {
      sum += *res.class_ap[c];
      ++scored;
    }
  }
  res.p_map = scored ? sum / scored : 0.0;
  return res;
}

EvalReport mp_map(std::span<const Detection> dets, std::span<const GroundTruthAction> gts) {
  EvalReport report;
  double sum = 0.0;
  for (double phi : kThresholds) {
    report.thresholds.push_back(p_map(dets, gts, phi));
    sum += report.thresholds.back().p_map;
  }
  report.mp_map = sum / static_cast<double>(kThresholds.size());
  return report;
}

double detections_per_gt(std::span<const Detection> dets, std::span<const GroundTruthAction> gts, double radius) {
  if (gts.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& g : gts) {
    for (const auto& d : dets) {
      if (d.cls == g.cls && d.video_id == g.video_id && std::fabs(d.time - g.end_time) <= radius) ++total;
    }
  }
  return static_cast<double>(total) / static_cast<double>(gts.size());
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["mp_map"] = report.mp_map_percent();
  auto& rows = j["thresholds"] = nlohmann::ordered_json::array();
  for (const auto& t : report.thresholds) {
    nlohmann::ordered_json row;
    row["phi_s"] = t.phi;
    row["p_map"] = 100.0 * t.p_map;
    for (std::size_t c = 0; c < kNumForeground; ++c) {
      const std::string key = "ap_" + std::string(to_string(kForegroundClasses[c]));
      row[key] = t.class_ap[c] ? nlohmann::ordered_json(100.0 * *t.class_ap[c]) : nlohmann::ordered_json(nullptr);
    }
    row["tp"] = t.tp;
    row["fp"] = t.fp;
    row["fn"] = t.fn;
    rows.push_back(std::move(row));
  }
  return j;
}

std::string format_table(const EvalReport& report) {
  std::string out = "phi(s)   p-mAP    AP(take)  AP(release)      TP      FP      FN\n";
  char line[160];
  for (const auto& t : report.thresholds) {
    std::snprintf(line, sizeof line, "%6.1f %7.2f %10.2f %12.2f %7zu %7zu %7zu\n", t.phi, 100.0 * t.p_map,
                  pct(t.class_ap[0]), pct(t.class_ap[1]), t.tp, t.fp, t.fn);
    out += line;
  }
  std::snprintf(line, sizeof line, "mp-mAP %.2f\n", report.mp_map_percent());
  out += line;
  return out;
}

}  // namespace otr::metrics
