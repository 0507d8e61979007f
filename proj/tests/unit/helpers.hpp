#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "egocomm/types.hpp"

namespace egocomm::testing {

inline FrameFeatures frame(std::int64_t index, double base = 0.0) {
  FrameFeatures f;
  f.frame_index = index;
  for (std::size_t k = 0; k < kNumMfcc; ++k) f.mfcc[k] = base + 0.25 * static_cast<double>(k);
  f.log_pitch = 5.0 + 0.01 * static_cast<double>(index);
  f.intensity = 1.5;
  f.hf_lf_ratio = 0.4;
  return f;
}

inline Recording recording(std::string id, std::int64_t minute, std::size_t n_frames) {
  Recording r;
  r.recording_id = std::move(id);
  r.minute_index = minute;
  for (std::size_t t = 0; t < n_frames; ++t) r.frames.push_back(frame(static_cast<std::int64_t>(t), 0.1 * static_cast<double>(t)));
  return r;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("egocomm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace egocomm::testing
