// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "otr/types.hpp"

// Point-level mAP.
//
// A detection matches a ground truth of the same class and video when their
// times differ by at most phi seconds. Detections are visited by descending
// score (ties: earlier time, then input order); each takes the nearest
// unmatched eligible ground truth (ties: earlier ground truth). AP is the
// non-interpolated mean of precision at each true positive over all ground
// truths of the class; p-mAP averages AP over take and release, and mp-mAP
// averages p-mAP over phi = 1..10 s.
namespace otr::metrics {

inline constexpr std::array<double, 10> kThresholds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

enum class Outcome { Ignored, TruePositive, FalsePositive };

struct MatchResult {
  std::vector<Outcome> outcome;                    // per detection, input order
  std::vector<std::optional<std::size_t>> gt_index;  // matched ground truth (index into gts)
  std::vector<std::size_t> ranked;                 // indices of class-`cls` detections in visiting order
  std::size_t num_gt = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Detections and ground truths of other classes are ignored.
MatchResult match_greedy(std::span<const Detection> dets, std::span<const GroundTruthAction> gts, double phi,
                         ActionClass cls);

// `ranked` lists TP/FP outcomes by descending score. Returns nullopt when there
// is nothing to score (no ground truth and no detections); 0 when only
// detections exist.
std::optional<double> average_precision(std::span<const Outcome> ranked, std::size_t num_gt);

struct ThresholdResult {
  double phi = 0.0;
  double p_map = 0.0;  // fraction in [0, 1]
  std::array<std::optional<double>, kNumForeground> class_ap{};
  std::size_t tp = 0, fp = 0, fn = 0;
};

ThresholdResult p_map(std::span<const Detection> dets, std::span<const GroundTruthAction> gts, double phi);

struct EvalReport {
  std::vector<ThresholdResult> thresholds;
  double mp_map = 0.0;  // fraction in [0, 1]

  double mp_map_percent() const { return 100.0 * mp_map; }
};

EvalReport mp_map(std::span<const Detection> dets, std::span<const GroundTruthAction> gts);

// Mean over ground truths of same-class detections within `radius` seconds.
double detections_per_gt(std::span<const Detection> dets, std::span<const GroundTruthAction> gts, double radius);

// Values are reported in percent.
nlohmann::ordered_json to_json(const EvalReport& report);
std::string format_table(const EvalReport& report);

}  // namespace otr::metrics
