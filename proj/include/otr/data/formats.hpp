// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "otr/numkernel/tensor.hpp"
#include "otr/types.hpp"

namespace otr::data {

// Per-frame features of one video.
struct FeatureSequence {
  std::string video_id;
  double fps = 4.0;
  nk::Tensor features;  // [T x D]

  std::size_t num_frames() const { return features.dim(0); }
  std::size_t feature_dim() const { return features.dim(1); }
};

// Feature file, little-endian:
//   "OTRF" | u32 version (=1) | u32 T | u32 D | f32 fps | T*D f32 row-major
// The video id is the file stem. Read errors throw FormatError with the byte offset.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;
inline constexpr const char* kFeatureExtension = ".otrf";

void write_features(const std::filesystem::path& path, const FeatureSequence& fs);
FeatureSequence read_features(const std::filesystem::path& path);

// Annotation CSV: header `video_id,class,end_time_s`, class in {take, release}.
// Read errors throw FormatError naming the line.
void write_annotations(const std::filesystem::path& path, const std::vector<GroundTruthAction>& actions);
std::vector<GroundTruthAction> read_annotations(const std::filesystem::path& path);

// Detection CSV: header `video_id,class,time_s,score`.
void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets);
std::vector<Detection> read_detections(const std::filesystem::path& path);

// A dataset directory holds `<video_id>.otrf` files plus `annotations.csv`.
struct Dataset {
  std::vector<FeatureSequence> videos;
  std::vector<GroundTruthAction> actions;

  // Actions belonging to one video, in file order.
  std::vector<GroundTruthAction> actions_for(const std::string& video_id) const;
};

inline constexpr const char* kAnnotationsFile = "annotations.csv";

void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
// Videos are returned sorted by id.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace otr::data
