// Copyright 2026 The OTR Authors
// SPDX-License-Identifier: Apache-2.0

#include "otr/data/formats.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "otr/error.hpp"

namespace otr::data {
namespace fs = std::filesystem;

namespace {

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::vector<char>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(const std::vector<char>& in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

float get_f32(const std::vector<char>& in, std::size_t off) { return std::bit_cast<float>(get_u32(in, off)); }

std::vector<char> slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(path.string(), 0, "cannot open file");
  return std::vector<char>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cols;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cols.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cols.push_back(cur);
  return cols;
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError(path.string(), line, std::string("bad ") + what + " '" + s + "'", true);
  }
  return v;
}

void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of(",\n\r") != std::string::npos) {
    throw std::invalid_argument("video id '" + id + "' must be non-empty and free of commas/newlines");
  }
}

// Reads a CSV with the given header; returns the data rows with their line numbers.
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_csv(const fs::path& path, const char* header,
                                                                       std::size_t columns) {
  std::ifstream f(path);
  if (!f) throw FormatError(path.string(), 0, "cannot open file", true);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  bool seen_header = false;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != header) throw FormatError(path.string(), lineno, std::string("expected header '") + header + "'", true);
      seen_header = true;
      continue;
    }
    auto cols = split_csv(line);
    if (cols.size() != columns) {
      throw FormatError(path.string(), lineno,
                        "expected " + std::to_string(columns) + " columns, got " + std::to_string(cols.size()), true);
    }
    rows.emplace_back(lineno, std::move(cols));
  }
  if (!seen_header) throw FormatError(path.string(), 1, std::string("missing header '") + header + "'", true);
  return rows;
}

ActionClass parse_class(const std::string& s, const fs::path& path, std::size_t line) {
  auto c = parse_foreground_class(s);
  if (!c) throw FormatError(path.string(), line, "unknown class '" + s + "'", true);
  return *c;
}

}  // namespace

void write_features(const fs::path& path, const FeatureSequence& seq) {
  const std::size_t T = seq.num_frames(), D = seq.feature_dim();
  std::vector<char> out;
  out.reserve(20 + T * D * 4);
  out.insert(out.end(), {'O', 'T', 'R', 'F'});
  put_u32(out, kFeatureFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(T));
  put_u32(out, static_cast<std::uint32_t>(D));
  put_f32(out, static_cast<float>(seq.fps));
  for (float v : seq.features.data()) put_f32(out, v);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

FeatureSequence read_features(const fs::path& path) {
  const std::vector<char> in = slurp(path);
  const std::string p = path.string();
  if (in.size() < 4 || std::memcmp(in.data(), "OTRF", 4) != 0) throw FormatError(p, 0, "bad magic (expected OTRF)");
  if (in.size() < 20) throw FormatError(p, in.size(), "truncated header");
  const std::uint32_t version = get_u32(in, 4);
  if (version != kFeatureFormatVersion) throw FormatError(p, 4, "unsupported version " + std::to_string(version));
  const std::size_t T = get_u32(in, 8), D = get_u32(in, 12);
  if (T < 1) throw FormatError(p, 8, "frame count must be >= 1");
  if (D < 1) throw FormatError(p, 12, "feature dimension must be >= 1");
  const float fps = get_f32(in, 16);
  if (!(fps > 0.0f) || !std::isfinite(fps)) throw FormatError(p, 16, "fps must be finite and > 0");
  const std::size_t need = 20 + T * D * 4;
  if (in.size() < need) throw FormatError(p, in.size(), "truncated data (expected " + std::to_string(need) + " bytes)");
  if (in.size() > need) throw FormatError(p, need, "trailing bytes after data");
  std::vector<float> values(T * D);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = get_f32(in, 20 + 4 * i);
    if (!std::isfinite(values[i])) throw FormatError(p, 20 + 4 * i, "non-finite feature value");
  }
  FeatureSequence seq;
  seq.video_id = path.stem().string();
  seq.fps = fps;
  seq.features = nk::Tensor({T, D}, std::move(values));
  return seq;
}

void write_annotations(const fs::path& path, const std::vector<GroundTruthAction>& actions) {
  std::string text = "video_id,class,end_time_s\n";
  for (const auto& a : actions) {
    check_id(a.video_id);
    text += a.video_id + "," + std::string(to_string(a.cls)) + "," + fmt_double(a.end_time) + "\n";
  }
  spit(path, text);
}

std::vector<GroundTruthAction> read_annotations(const fs::path& path) {
  std::vector<GroundTruthAction> out;
  for (auto& [line, cols] : read_csv(path, "video_id,class,end_time_s", 3)) {
    if (cols[0].empty()) throw FormatError(path.string(), line, "empty video_id", true);
    const double t = parse_double(cols[2], path, line, "end_time_s");
    if (t < 0.0) throw FormatError(path.string(), line, "negative end_time_s", true);
    out.push_back(GroundTruthAction{cols[0], parse_class(cols[1], path, line), t});
  }
  return out;
}

void write_detections(const fs::path& path, const std::vector<Detection>& dets) {
  std::string text = "video_id,class,time_s,score\n";
  for (const auto& d : dets) {
    check_id(d.video_id);
    text += d.video_id + "," + std::string(to_string(d.cls)) + "," + fmt_double(d.time) + "," + fmt_double(d.score) +
            "\n";
  }
  spit(path, text);
}

std::vector<Detection> read_detections(const fs::path& path) {
  std::vector<Detection> out;
  for (auto& [line, cols] : read_csv(path, "video_id,class,time_s,score", 4)) {
    if (cols[0].empty()) throw FormatError(path.string(), line, "empty video_id", true);
    const double t = parse_double(cols[2], path, line, "time_s");
    const double s = parse_double(cols[3], path, line, "score");
    if (s < 0.0 || s > 1.0) throw FormatError(path.string(), line, "score outside [0, 1]", true);
    out.push_back(Detection{cols[0], parse_class(cols[1], path, line), t, s});
  }
  return out;
}

std::vector<GroundTruthAction> Dataset::actions_for(const std::string& video_id) const {
  std::vector<GroundTruthAction> out;
  std::copy_if(actions.begin(), actions.end(), std::back_inserter(out),
               [&](const GroundTruthAction& a) { return a.video_id == video_id; });
  return out;
}

void write_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  for (const auto& v : ds.videos) {
    check_id(v.video_id);
    write_features(dir / (v.video_id + kFeatureExtension), v);
  }
  write_annotations(dir / kAnnotationsFile, ds.actions);
}

Dataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError(dir.string(), 0, "not a dataset directory");
  Dataset ds;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == kFeatureExtension) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) ds.videos.push_back(read_features(f));
  ds.actions = read_annotations(dir / kAnnotationsFile);
  return ds;
}

}  // namespace otr::data
