#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "egocomm/error.hpp"

namespace egocomm {

inline constexpr std::size_t kNumMfcc = 12;
inline constexpr std::size_t kNumClasses = 3;
// 10 ms hop, so a 20 s sensing window holds at most 2000 frames.
inline constexpr std::size_t kMaxFramesPerRecording = 2000;
inline constexpr double kFrameHopSeconds = 0.01;

// Class order doubles as the argmax tie-break order.
enum class FrameClass : std::uint8_t { FG = 0, BG = 1, S = 2 };

inline constexpr bool is_speech(FrameClass c) { return c != FrameClass::S; }

enum class ShiftType : std::uint8_t { Day, Night };
enum class Sex : std::uint8_t { Male, Female };
enum class AgeGroup : std::uint8_t { Under40, From40To49, From50 };
enum class WorkUnit : std::uint8_t { ICU, NonICU, Float, Lab, Office, Other };

inline constexpr std::array kAllShiftTypes{ShiftType::Day, ShiftType::Night};
inline constexpr std::array kAllSexes{Sex::Male, Sex::Female};
inline constexpr std::array kAllAgeGroups{AgeGroup::Under40, AgeGroup::From40To49, AgeGroup::From50};
inline constexpr std::array kAllWorkUnits{WorkUnit::ICU,  WorkUnit::NonICU, WorkUnit::Float,
                                          WorkUnit::Lab,  WorkUnit::Office, WorkUnit::Other};

inline constexpr std::string_view to_string(FrameClass c) {
  switch (c) {
    case FrameClass::FG: return "FG";
    case FrameClass::BG: return "BG";
    case FrameClass::S: return "S";
  }
  return "?";
}
inline constexpr std::string_view to_string(ShiftType v) { return v == ShiftType::Day ? "day" : "night"; }
inline constexpr std::string_view to_string(Sex v) { return v == Sex::Male ? "male" : "female"; }
inline constexpr std::string_view to_string(AgeGroup v) {
  switch (v) {
    case AgeGroup::Under40: return "under40";
    case AgeGroup::From40To49: return "40to49";
    case AgeGroup::From50: return "50plus";
  }
  return "?";
}
inline constexpr std::string_view to_string(WorkUnit v) {
  switch (v) {
    case WorkUnit::ICU: return "ICU";
    case WorkUnit::NonICU: return "nonICU";
    case WorkUnit::Float: return "float";
    case WorkUnit::Lab: return "lab";
    case WorkUnit::Office: return "office";
    case WorkUnit::Other: return "other";
  }
  return "?";
}

namespace detail {
template <typename Enum, std::size_t N>
Enum parse_level(std::string_view text, const std::array<Enum, N>& levels, std::string_view what) {
  for (Enum level : levels)
    if (to_string(level) == text) return level;
  fail(ErrorCode::UnknownEnumLevel, std::string(what) + " level '" + std::string(text) + "'");
}
}  // namespace detail

inline FrameClass parse_frame_class(std::string_view text) {
  return detail::parse_level(text, std::array{FrameClass::FG, FrameClass::BG, FrameClass::S}, "label");
}
inline ShiftType parse_shift_type(std::string_view text) {
  return detail::parse_level(text, kAllShiftTypes, "shift_type");
}
inline Sex parse_sex(std::string_view text) { return detail::parse_level(text, kAllSexes, "sex"); }
inline AgeGroup parse_age_group(std::string_view text) {
  return detail::parse_level(text, kAllAgeGroups, "age_group");
}
inline WorkUnit parse_work_unit(std::string_view text) {
  return detail::parse_level(text, kAllWorkUnits, "work_unit");
}

/// One 10 ms analysis frame. `log_pitch` is empty for unvoiced frames.
/// `intensity` is loudness on a linear scale.
struct FrameFeatures {
  std::int64_t frame_index = 0;
  std::array<double, kNumMfcc> mfcc{};
  std::optional<double> log_pitch;
  double intensity = 0.0;
  double hf_lf_ratio = 0.0;

  friend bool operator==(const FrameFeatures&, const FrameFeatures&) = default;
};

/// A single sensing window, stamped with its offset (minutes) from shift start.
struct Recording {
  std::string recording_id;
  std::int64_t minute_index = 0;
  std::vector<FrameFeatures> frames;
  std::optional<std::vector<FrameClass>> labels;

  friend bool operator==(const Recording&, const Recording&) = default;
};

struct Shift {
  std::string shift_id;
  ShiftType shift_type = ShiftType::Day;
  std::string start_time;  // ISO-8601
  double duration_hours = 0.0;
  std::vector<Recording> recordings;

  friend bool operator==(const Shift&, const Shift&) = default;
};

struct SurveyRecord {
  std::optional<int> stai_total;  // [40, 160]
  std::optional<int> irb_total;   // [7, 49]

  friend bool operator==(const SurveyRecord&, const SurveyRecord&) = default;
};

struct Participant {
  std::string participant_id;
  Sex sex = Sex::Female;
  AgeGroup age_group = AgeGroup::Under40;
  WorkUnit work_unit = WorkUnit::Other;
  ShiftType primary_shift = ShiftType::Day;
  std::vector<Shift> shifts;
  SurveyRecord surveys;

  friend bool operator==(const Participant&, const Participant&) = default;
};

struct Cohort {
  std::vector<Participant> participants;

  friend bool operator==(const Cohort&, const Cohort&) = default;
};

using Posterior = std::array<double, kNumClasses>;

struct TeacherPosteriors {
  std::string recording_id;
  std::vector<Posterior> rows;

  friend bool operator==(const TeacherPosteriors&, const TeacherPosteriors&) = default;
};

inline void validate_survey(const SurveyRecord& s, std::string_view who) {
  if (s.stai_total && (*s.stai_total < 40 || *s.stai_total > 160))
    fail(ErrorCode::InvalidSurvey, std::string(who) + ": stai_total out of [40,160]");
  if (s.irb_total && (*s.irb_total < 7 || *s.irb_total > 49))
    fail(ErrorCode::InvalidSurvey, std::string(who) + ": irb_total out of [7,49]");
}

/// Checks the Recording invariants; throws on the first violation.
inline void validate_recording(const Recording& r) {
  if (r.frames.empty()) fail(ErrorCode::MalformedRow, r.recording_id + ": recording has no frames");
  if (r.frames.size() > kMaxFramesPerRecording)
    fail(ErrorCode::TooManyFrames, r.recording_id + ": " + std::to_string(r.frames.size()) + " frames");
  for (std::size_t i = 1; i < r.frames.size(); ++i)
    if (r.frames[i].frame_index <= r.frames[i - 1].frame_index)
      fail(ErrorCode::NonMonotoneFrameIndex, r.recording_id + ": frame " + std::to_string(i));
  for (const auto& f : r.frames)
    if (!(f.intensity >= 0.0) || !(f.hf_lf_ratio >= 0.0))
      fail(ErrorCode::MalformedRow, r.recording_id + ": negative intensity or hf_lf_ratio");
  if (r.labels && r.labels->size() != r.frames.size())
    fail(ErrorCode::MalformedRow, r.recording_id + ": label count differs from frame count");
}

inline void validate_shift(const Shift& s) {
  if (!(s.duration_hours > 0.0)) fail(ErrorCode::InvalidShift, s.shift_id + ": duration_hours must be > 0");
  const double limit = s.duration_hours * 60.0;
  std::vector<std::int64_t> seen;
  seen.reserve(s.recordings.size());
  for (const auto& r : s.recordings) {
    if (r.minute_index < 0 || static_cast<double>(r.minute_index) >= limit)
      fail(ErrorCode::InvalidShift, s.shift_id + ": minute_index " + std::to_string(r.minute_index) +
                                        " outside shift");
    seen.push_back(r.minute_index);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    fail(ErrorCode::InvalidShift, s.shift_id + ": duplicate minute_index");
}

inline std::size_t count_class(std::span<const FrameClass> labels, FrameClass c) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c));
}

}  // namespace egocomm
