#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egocomm/error.hpp"
#include "egocomm/types.hpp"

namespace egocomm {

inline constexpr int kDefaultMinFgFrames = 200;
inline constexpr int kDefaultMinShifts = 5;

/// A maximal run of qualifying recordings on consecutive minutes.
struct Session {
  std::vector<std::int64_t> minute_indices;
  std::vector<std::string> recording_ids;

  std::size_t length() const { return minute_indices.size(); }
  std::int64_t first_minute() const { return minute_indices.front(); }

  friend bool operator==(const Session&, const Session&) = default;
};

struct BehaviorFeatures {
  double sessions_per_hour = 0.0;
  std::optional<double> avg_session_duration_min;  // absent when n_sessions == 0
  std::size_t n_sessions = 0;

  friend bool operator==(const BehaviorFeatures&, const BehaviorFeatures&) = default;
};

/// Frame labels keyed by recording_id.
using LabelMap = std::map<std::string, std::vector<FrameClass>>;

/// Minute indices (ascending) of recordings with at least `min_fg_frames`
/// FG frames. Labels come from `labels` when present there, otherwise from
/// the recording itself.
inline std::vector<std::int64_t> qualify_recordings(const Shift& shift, const LabelMap& labels,
                                                    int min_fg_frames = kDefaultMinFgFrames) {
  std::vector<std::int64_t> out;
  for (const auto& rec : shift.recordings) {
    const std::vector<FrameClass>* lab = nullptr;
    if (auto it = labels.find(rec.recording_id); it != labels.end())
      lab = &it->second;
    else if (rec.labels)
      lab = &*rec.labels;
    if (!lab) fail(ErrorCode::MissingLabels, rec.recording_id);
    if (count_class(*lab, FrameClass::FG) >= static_cast<std::size_t>(std::max(min_fg_frames, 0)))
      out.push_back(rec.minute_index);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Groups sorted, unique minute indices into maximal runs of consecutive
/// integers. `recording_ids`, when given, is parallel to `minute_indices`.
inline std::vector<Session> segment_sessions(std::span<const std::int64_t> minute_indices,
                                             std::span<const std::string> recording_ids = {}) {
  if (!recording_ids.empty() && recording_ids.size() != minute_indices.size())
    fail(ErrorCode::LengthMismatch, "recording_ids not parallel to minute_indices");
  std::vector<Session> sessions;
  for (std::size_t i = 0; i < minute_indices.size(); ++i) {
    const auto m = minute_indices[i];
    if (i > 0 && m <= minute_indices[i - 1])
      fail(ErrorCode::UnsortedInput, "minute indices must be strictly increasing");
    if (sessions.empty() || m != sessions.back().minute_indices.back() + 1) sessions.emplace_back();
    sessions.back().minute_indices.push_back(m);
    if (!recording_ids.empty()) sessions.back().recording_ids.push_back(recording_ids[i]);
  }
  return sessions;
}

/// Sessions of one shift, carrying recording ids.
inline std::vector<Session> shift_sessions(const Shift& shift, const LabelMap& labels,
                                           int min_fg_frames = kDefaultMinFgFrames) {
  const auto minutes = qualify_recordings(shift, labels, min_fg_frames);
  std::map<std::int64_t, std::string> id_at;
  for (const auto& r : shift.recordings) id_at[r.minute_index] = r.recording_id;
  std::vector<std::string> ids;
  ids.reserve(minutes.size());
  for (auto m : minutes) ids.push_back(id_at.at(m));
  return segment_sessions(minutes, ids);
}

/// Session rate per hour and mean session length in minutes (one recording
/// per occupied minute).
inline BehaviorFeatures shift_features(const Shift& shift, std::span<const Session> sessions) {
  if (!(shift.duration_hours > 0.0)) fail(ErrorCode::ZeroDuration, shift.shift_id);
  BehaviorFeatures f;
  f.n_sessions = sessions.size();
  f.sessions_per_hour = static_cast<double>(sessions.size()) / shift.duration_hours;
  if (!sessions.empty()) {
    double total = 0.0;
    for (const auto& s : sessions) total += static_cast<double>(s.length());
    f.avg_session_duration_min = total / static_cast<double>(sessions.size());
  }
  return f;
}

/// Unweighted mean over shifts; durations average only shifts that have one.
/// n_sessions is the total across shifts.
inline BehaviorFeatures participant_features(std::span<const BehaviorFeatures> per_shift) {
  if (per_shift.empty()) fail(ErrorCode::NoShifts, "participant has no shift features");
  BehaviorFeatures out;
  double rate = 0.0, duration = 0.0;
  std::size_t with_duration = 0;
  for (const auto& f : per_shift) {
    rate += f.sessions_per_hour;
    out.n_sessions += f.n_sessions;
    if (f.avg_session_duration_min) {
      duration += *f.avg_session_duration_min;
      ++with_duration;
    }
  }
  out.sessions_per_hour = rate / static_cast<double>(per_shift.size());
  if (with_duration > 0) out.avg_session_duration_min = duration / static_cast<double>(with_duration);
  return out;
}

enum class ShiftHalf { First, Second };

inline constexpr std::string_view to_string(ShiftHalf h) { return h == ShiftHalf::First ? "first" : "second"; }

/// Halves split at duration_hours * 30 minutes; a minute belongs to the first
/// half when it is strictly before the midpoint.
inline ShiftHalf half_of(const Shift& shift, std::int64_t minute_index) {
  return static_cast<double>(minute_index) < shift.duration_hours * 30.0 ? ShiftHalf::First : ShiftHalf::Second;
}

/// A session is assigned to the half holding its first minute.
inline ShiftHalf half_of(const Shift& shift, const Session& session) { return half_of(shift, session.first_minute()); }

}  // namespace egocomm
