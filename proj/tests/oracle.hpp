// Reference implementations used only by tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <tuple>
#include <vector>

#include "otr/metrics.hpp"
#include "otr/types.hpp"

namespace oracle {

using otr::ActionClass;
using otr::Detection;
using otr::GroundTruthAction;
using otr::metrics::Outcome;

struct Matching {
  std::vector<Outcome> outcome;                      // per detection, input order
  std::vector<std::optional<std::size_t>> gt_index;  // per detection
  std::vector<std::size_t> ranked;
};

// Tries every injective assignment of class-`cls` detections to eligible ground
// truths and keeps the lexicographically smallest under the key
// (unmatched?, distance, gt end time, gt index) taken detection by detection in rank order.
inline Matching brute_force_match(std::span<const Detection> dets, std::span<const GroundTruthAction> gts, double phi,
                                  ActionClass cls) {
  Matching m;
  m.outcome.assign(dets.size(), Outcome::Ignored);
  m.gt_index.assign(dets.size(), std::nullopt);
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (dets[i].cls == cls) m.ranked.push_back(i);
  std::stable_sort(m.ranked.begin(), m.ranked.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(dets[b].score, dets[a].time) < std::tie(dets[a].score, dets[b].time);
  });

  using Key = std::tuple<int, double, double, std::size_t>;
  std::vector<Key> best_key, key;
  std::vector<std::optional<std::size_t>> best_pick, pick;
  std::vector<bool> used(gts.size(), false);
  bool have_best = false;

  auto recurse = [&](auto&& self, std::size_t k) -> void {
    if (k == m.ranked.size()) {
      if (!have_best || key < best_key) {
        best_key = key;
        best_pick = pick;
        have_best = true;
      }
      return;
    }
    const Detection& d = dets[m.ranked[k]];
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].cls != cls || gts[g].video_id != d.video_id) continue;
      const double dist = std::fabs(d.time - gts[g].end_time);
      if (dist > phi) continue;
      used[g] = true;
      key.emplace_back(0, dist, gts[g].end_time, g);
      pick.emplace_back(g);
      self(self, k + 1);
      key.pop_back();
      pick.pop_back();
      used[g] = false;
    }
    key.emplace_back(1, 0.0, 0.0, 0);
    pick.emplace_back(std::nullopt);
    self(self, k + 1);
    key.pop_back();
    pick.pop_back();
  };
  recurse(recurse, 0);

  for (std::size_t k = 0; k < m.ranked.size(); ++k) {
    const std::size_t i = m.ranked[k];
    m.gt_index[i] = best_pick[k];
    m.outcome[i] = best_pick[k] ? Outcome::TruePositive : Outcome::FalsePositive;
  }
  return m;
}

// Non-interpolated AP straight from the definition.
inline std::optional<double> ap(const std::vector<Outcome>& ranked, std::size_t num_gt) {
  if (num_gt == 0) return ranked.empty() ? std::nullopt : std::optional<double>(0.0);
  double sum = 0.0;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (ranked[k] == Outcome::TruePositive) sum += static_cast<double>(++tp) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(num_gt);
}

inline double p_map(std::span<const Detection> dets, std::span<const GroundTruthAction> gts, double phi) {
  double sum = 0.0;
  int n = 0;
  for (ActionClass cls : otr::kForegroundClasses) {
    const Matching m = brute_force_match(dets, gts, phi, cls);
    std::vector<Outcome> ranked;
    for (std::size_t i : m.ranked) ranked.push_back(m.outcome[i]);
    const auto num_gt = static_cast<std::size_t>(
        std::count_if(gts.begin(), gts.end(), [&](const GroundTruthAction& g) { return g.cls == cls; }));
    if (auto a = ap(ranked, num_gt)) {
      sum += *a;
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

// Small random instance on a coarse time grid so ties in time and score occur.
struct Instance {
  std::vector<Detection> dets;
  std::vector<GroundTruthAction> gts;
};

inline Instance random_instance(std::mt19937_64& rng, std::size_t max_dets, std::size_t max_gts, int videos = 2) {
  Instance in;
  const std::size_t nd = rng() % (max_dets + 1), ng = rng() % (max_gts + 1);
  auto video = [&] { return std::string("v") + std::to_string(rng() % static_cast<unsigned>(videos)); };
  auto cls = [&] { return rng() % 3 == 0 ? ActionClass::Release : ActionClass::Take; };
  for (std::size_t i = 0; i < ng; ++i) in.gts.push_back({video(), cls(), 0.5 * static_cast<double>(rng() % 24)});
  for (std::size_t i = 0; i < nd; ++i)
    in.dets.push_back({video(), cls(), 0.5 * static_cast<double>(rng() % 24), 0.1 * static_cast<double>(rng() % 6)});
  return in;
}

}  // namespace oracle
