// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace otr {

// Per-frame output classes. Background is last so foreground classes are 0..kNumForeground-1.
enum class ActionClass : int { Take = 0, Release = 1, Background = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::size_t kNumForeground = 2;
inline constexpr std::size_t kBackgroundIndex = 2;
inline constexpr std::array<ActionClass, kNumForeground> kForegroundClasses{ActionClass::Take,
                                                                           ActionClass::Release};

inline constexpr std::size_t index_of(ActionClass c) { return static_cast<std::size_t>(c); }

inline std::string_view to_string(ActionClass c) {
  switch (c) {
    case ActionClass::Take: return "take";
    case ActionClass::Release: return "release";
    case ActionClass::Background: return "background";
  }
  return "?";
}

// Only foreground names parse; background never appears in annotation or detection files.
inline std::optional<ActionClass> parse_foreground_class(std::string_view s) {
  if (s == "take") return ActionClass::Take;
  if (s == "release") return ActionClass::Release;
  return std::nullopt;
}

// A ground-truth action end point: class and end timestamp in seconds.
struct GroundTruthAction {
  std::string video_id;
  ActionClass cls = ActionClass::Take;
  double end_time = 0.0;
};

// A predicted action end point with its confidence.
struct Detection {
  std::string video_id;
  ActionClass cls = ActionClass::Take;
  double time = 0.0;
  double score = 0.0;
};

inline double frame_to_time(std::size_t frame, double fps) { return static_cast<double>(frame) / fps; }

// Nearest frame at `fps`; exact half-way points go to the earlier frame.
inline std::int64_t time_to_frame(double seconds, double fps) {
  const double x = seconds * fps;
  const double lower = std::floor(x);
  return static_cast<std::int64_t>(x - lower > 0.5 ? lower + 1.0 : lower);
}

}  // namespace otr
