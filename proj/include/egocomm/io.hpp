#pragma once

// Text formats for feature recordings, teacher posteriors, surveys and the
// line-delimited JSON cohort manifest.
//
// Feature file (header row required):
//   frame_index,mfcc1,...,mfcc12,log_pitch,intensity,hf_lf_ratio[,label]
// An empty log_pitch field marks an unvoiced frame. label is FG, BG or S.
//
// Teacher posterior file:  frame_index,p_fg,p_bg,p_s
// Survey file:             participant_id,stai_total,irb_total   (empty = absent)
//
// Manifest: one JSON object per line, discriminated by "type":
//   {"type":"participant","participant_id","sex","age_group","work_unit","primary_shift"}
//   {"type":"shift","participant_id","shift_id","shift_type","start_time","duration_hours"}
//   {"type":"recording","shift_id","recording_id","minute_index","features"}
//   {"type":"surveys","path"}
// Paths are relative to the manifest's directory.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "egocomm/error.hpp"
#include "egocomm/text.hpp"
#include "egocomm/types.hpp"

namespace egocomm {

struct FeatureFileFormat {
  char delimiter = ',';
};

inline constexpr std::size_t kFeatureColumns = 1 + kNumMfcc + 3;

namespace detail {

inline std::string row_context(std::string_view id, std::size_t lineno) {
  return (id.empty() ? std::string("<recording>") : std::string(id)) + " line " + std::to_string(lineno);
}

inline double field_double(std::string_view field, std::string_view id, std::size_t lineno) {
  double v = 0.0;
  if (!text::parse_double(field, v))
    fail(ErrorCode::MalformedRow, row_context(id, lineno) + ": not a number '" + std::string(field) + "'");
  return v;
}

inline std::string feature_header(char d, bool with_label) {
  std::string h = "frame_index";
  for (std::size_t k = 1; k <= kNumMfcc; ++k) h += d + std::string("mfcc") + std::to_string(k);
  h += d + std::string("log_pitch") + d + "intensity" + d + "hf_lf_ratio";
  if (with_label) h += d + std::string("label");
  return h;
}

}  // namespace detail

/// Parses one feature file. Frames must arrive in strictly increasing
/// frame_index order; the label column is optional but all-or-nothing.
inline Recording parse_recording(std::string_view bytes, const FeatureFileFormat& format = {},
                                 std::string recording_id = {}, std::int64_t minute_index = 0) {
  Recording rec;
  rec.recording_id = std::move(recording_id);
  rec.minute_index = minute_index;
  const auto rows = text::lines(bytes);
  if (rows.empty()) fail(ErrorCode::MalformedRow, rec.recording_id + ": empty feature file");

  const auto header = text::split(rows.front().second, format.delimiter);
  bool has_label = false;
  if (header.size() == kFeatureColumns + 1 && header.back() == "label")
    has_label = true;
  else if (header.size() != kFeatureColumns)
    fail(ErrorCode::MalformedRow, detail::row_context(rec.recording_id, rows.front().first) +
                                      ": expected " + std::to_string(kFeatureColumns) + " header columns");
  if (header.front() != "frame_index")
    fail(ErrorCode::MalformedRow, detail::row_context(rec.recording_id, rows.front().first) +
                                      ": header must start with frame_index");

  const std::size_t expected = kFeatureColumns + (has_label ? 1 : 0);
  if (rows.size() - 1 > kMaxFramesPerRecording)
    fail(ErrorCode::TooManyFrames, rec.recording_id + ": " + std::to_string(rows.size() - 1) + " frames");
  rec.frames.reserve(rows.size() - 1);
  std::vector<FrameClass> labels;
  if (has_label) labels.reserve(rows.size() - 1);

  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto [lineno, line] = rows[i];
    const auto cols = text::split(line, format.delimiter);
    if (cols.size() != expected)
      fail(ErrorCode::MalformedRow, detail::row_context(rec.recording_id, lineno) + ": " +
                                        std::to_string(cols.size()) + " columns, expected " +
                                        std::to_string(expected));
    FrameFeatures f;
    if (!text::parse_int(cols[0], f.frame_index))
      fail(ErrorCode::MalformedRow, detail::row_context(rec.recording_id, lineno) + ": bad frame_index");
    if (!rec.frames.empty() && f.frame_index <= rec.frames.back().frame_index)
      fail(ErrorCode::NonMonotoneFrameIndex,
           detail::row_context(rec.recording_id, lineno) + ": frame_index " + std::to_string(f.frame_index));
    for (std::size_t k = 0; k < kNumMfcc; ++k) f.mfcc[k] = detail::field_double(cols[1 + k], rec.recording_id, lineno);
    const auto pitch = cols[1 + kNumMfcc];
    if (!pitch.empty()) f.log_pitch = detail::field_double(pitch, rec.recording_id, lineno);
    f.intensity = detail::field_double(cols[2 + kNumMfcc], rec.recording_id, lineno);
    f.hf_lf_ratio = detail::field_double(cols[3 + kNumMfcc], rec.recording_id, lineno);
    if (f.intensity < 0.0 || f.hf_lf_ratio < 0.0)
      fail(ErrorCode::MalformedRow, detail::row_context(rec.recording_id, lineno) + ": negative energy field");
    if (has_label) labels.push_back(parse_frame_class(cols[kFeatureColumns]));
    rec.frames.push_back(f);
  }
  if (rec.frames.empty()) fail(ErrorCode::MalformedRow, rec.recording_id + ": no frames");
  if (has_label) rec.labels = std::move(labels);
  return rec;
}

inline std::string serialize_recording(const Recording& rec, const FeatureFileFormat& format = {}) {
  const char d = format.delimiter;
  std::string out = detail::feature_header(d, rec.labels.has_value());
  out += '\n';
  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    const auto& f = rec.frames[i];
    out += std::to_string(f.frame_index);
    for (double m : f.mfcc) (out += d) += text::format_double(m);
    out += d;
    if (f.log_pitch) out += text::format_double(*f.log_pitch);
    (out += d) += text::format_double(f.intensity);
    (out += d) += text::format_double(f.hf_lf_ratio);
    if (rec.labels) (out += d) += to_string((*rec.labels)[i]);
    out += '\n';
  }
  return out;
}

inline constexpr double kPosteriorSumTolerance = 1e-6;

/// Parses a teacher posterior file; every row must be a simplex point.
inline TeacherPosteriors parse_teacher(std::string_view bytes, std::string recording_id = {}) {
  TeacherPosteriors tp;
  tp.recording_id = std::move(recording_id);
  const auto rows = text::lines(bytes);
  if (rows.empty()) fail(ErrorCode::InvalidPosteriors, tp.recording_id + ": empty posterior file");
  const auto header = text::split(rows.front().second, ',');
  if (header.size() != 4 || header[0] != "frame_index")
    fail(ErrorCode::InvalidPosteriors, tp.recording_id + ": bad header");
  std::optional<std::int64_t> last;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto [lineno, line] = rows[i];
    const auto cols = text::split(line, ',');
    if (cols.size() != 4)
      fail(ErrorCode::MalformedRow, detail::row_context(tp.recording_id, lineno) + ": expected 4 columns");
    std::int64_t idx = 0;
    if (!text::parse_int(cols[0], idx))
      fail(ErrorCode::MalformedRow, detail::row_context(tp.recording_id, lineno) + ": bad frame_index");
    if (last && idx <= *last)
      fail(ErrorCode::NonMonotoneFrameIndex, detail::row_context(tp.recording_id, lineno));
    last = idx;
    Posterior p{};
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      p[c] = detail::field_double(cols[1 + c], tp.recording_id, lineno);
      if (p[c] < 0.0)
        fail(ErrorCode::InvalidPosteriors, detail::row_context(tp.recording_id, lineno) + ": negative mass");
      sum += p[c];
    }
    if (std::abs(sum - 1.0) > kPosteriorSumTolerance)
      fail(ErrorCode::InvalidPosteriors, detail::row_context(tp.recording_id, lineno) + ": row sums to " +
                                             text::format_double(sum));
    tp.rows.push_back(p);
  }
  return tp;
}

inline std::string serialize_teacher(const TeacherPosteriors& tp, std::span<const FrameFeatures> frames = {}) {
  std::string out = "frame_index,p_fg,p_bg,p_s\n";
  for (std::size_t i = 0; i < tp.rows.size(); ++i) {
    out += std::to_string(frames.empty() ? static_cast<std::int64_t>(i) : frames[i].frame_index);
    for (double p : tp.rows[i]) (out += ',') += text::format_double(p);
    out += '\n';
  }
  return out;
}

inline void check_alignment(const TeacherPosteriors& tp, const Recording& rec) {
  if (tp.rows.size() != rec.frames.size())
    fail(ErrorCode::InvalidPosteriors, rec.recording_id + ": " + std::to_string(tp.rows.size()) +
                                           " teacher rows for " + std::to_string(rec.frames.size()) + " frames");
}

inline std::map<std::string, SurveyRecord> parse_surveys(std::string_view bytes) {
  std::map<std::string, SurveyRecord> out;
  const auto rows = text::lines(bytes);
  if (rows.empty()) return out;
  const auto header = text::split(rows.front().second, ',');
  if (header.size() != 3 || header[0] != "participant_id")
    fail(ErrorCode::InvalidSurvey, "survey header must be participant_id,stai_total,irb_total");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto [lineno, line] = rows[i];
    const auto cols = text::split(line, ',');
    if (cols.size() != 3) fail(ErrorCode::MalformedRow, "survey line " + std::to_string(lineno));
    SurveyRecord s;
    auto read = [&](std::string_view field, std::optional<int>& slot) {
      if (field.empty()) return;
      int v = 0;
      if (!text::parse_int(field, v)) fail(ErrorCode::MalformedRow, "survey line " + std::to_string(lineno));
      slot = v;
    };
    read(cols[1], s.stai_total);
    read(cols[2], s.irb_total);
    validate_survey(s, cols[0]);
    out[std::string(cols[0])] = s;
  }
  return out;
}

inline std::string serialize_surveys(const Cohort& cohort) {
  std::string out = "participant_id,stai_total,irb_total\n";
  for (const auto& p : cohort.participants) {
    out += p.participant_id + ',';
    if (p.surveys.stai_total) out += std::to_string(*p.surveys.stai_total);
    out += ',';
    if (p.surveys.irb_total) out += std::to_string(*p.surveys.irb_total);
    out += '\n';
  }
  return out;
}

struct ManifestOptions {
  std::filesystem::path base_dir;
  FeatureFileFormat format;
};

namespace detail {

inline std::string json_string(const nlohmann::json& obj, const char* key, std::size_t lineno) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    fail(ErrorCode::MalformedManifest, "manifest line " + std::to_string(lineno) + ": missing string '" + key + "'");
  return it->get<std::string>();
}

template <typename Number>
Number json_number(const nlohmann::json& obj, const char* key, std::size_t lineno) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number())
    fail(ErrorCode::MalformedManifest, "manifest line " + std::to_string(lineno) + ": missing number '" + key + "'");
  return it->get<Number>();
}

}  // namespace detail

/// Reads a cohort manifest and every file it references. Recordings are
/// loaded eagerly and sorted by minute_index within their shift.
inline Cohort parse_manifest(std::string_view bytes, const ManifestOptions& options = {}) {
  struct PendingRecording {
    std::string shift_id, recording_id, features;
    std::int64_t minute_index;
    std::size_t lineno;
  };
  Cohort cohort;
  std::unordered_map<std::string, std::size_t> participant_at;
  std::vector<std::pair<std::string, Shift>> shifts;  // (participant_id, shift)
  std::unordered_map<std::string, std::size_t> shift_at;
  std::vector<PendingRecording> recordings;
  std::vector<std::string> survey_paths;

  for (const auto& [lineno, line] : text::lines(bytes)) {
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::MalformedManifest, "manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object()) fail(ErrorCode::MalformedManifest, "manifest line " + std::to_string(lineno));
    const auto type = detail::json_string(obj, "type", lineno);
    if (type == "participant") {
      Participant p;
      p.participant_id = detail::json_string(obj, "participant_id", lineno);
      p.sex = parse_sex(detail::json_string(obj, "sex", lineno));
      p.age_group = parse_age_group(detail::json_string(obj, "age_group", lineno));
      p.work_unit = parse_work_unit(detail::json_string(obj, "work_unit", lineno));
      p.primary_shift = parse_shift_type(detail::json_string(obj, "primary_shift", lineno));
      if (!participant_at.emplace(p.participant_id, cohort.participants.size()).second)
        fail(ErrorCode::DuplicateParticipantId, p.participant_id);
      cohort.participants.push_back(std::move(p));
    } else if (type == "shift") {
      Shift s;
      auto owner = detail::json_string(obj, "participant_id", lineno);
      s.shift_id = detail::json_string(obj, "shift_id", lineno);
      s.shift_type = parse_shift_type(detail::json_string(obj, "shift_type", lineno));
      s.start_time = detail::json_string(obj, "start_time", lineno);
      s.duration_hours = detail::json_number<double>(obj, "duration_hours", lineno);
      if (!shift_at.emplace(s.shift_id, shifts.size()).second)
        fail(ErrorCode::MalformedManifest, "duplicate shift_id " + s.shift_id);
      shifts.emplace_back(std::move(owner), std::move(s));
    } else if (type == "recording") {
      recordings.push_back({detail::json_string(obj, "shift_id", lineno),
                            detail::json_string(obj, "recording_id", lineno),
                            detail::json_string(obj, "features", lineno),
                            detail::json_number<std::int64_t>(obj, "minute_index", lineno), lineno});
    } else if (type == "surveys") {
      survey_paths.push_back(detail::json_string(obj, "path", lineno));
    } else {
      fail(ErrorCode::MalformedManifest, "manifest line " + std::to_string(lineno) + ": unknown type " + type);
    }
  }

  std::set<std::string> recording_ids;
  for (const auto& pr : recordings) {
    auto it = shift_at.find(pr.shift_id);
    if (it == shift_at.end())
      fail(ErrorCode::MalformedManifest, "recording " + pr.recording_id + " names unknown shift " + pr.shift_id);
    if (!recording_ids.insert(pr.recording_id).second)
      fail(ErrorCode::MalformedManifest, "duplicate recording_id " + pr.recording_id);
    const auto path = options.base_dir / pr.features;
    if (!std::filesystem::is_regular_file(path))
      fail(ErrorCode::DanglingRecordingRef, pr.recording_id + " -> " + pr.features);
    shifts[it->second].second.recordings.push_back(
        parse_recording(text::read_file(path), options.format, pr.recording_id, pr.minute_index));
  }

  for (auto& [owner, shift] : shifts) {
    auto it = participant_at.find(owner);
    if (it == participant_at.end())
      fail(ErrorCode::MalformedManifest, "shift " + shift.shift_id + " names unknown participant " + owner);
    std::stable_sort(shift.recordings.begin(), shift.recordings.end(),
                     [](const Recording& a, const Recording& b) { return a.minute_index < b.minute_index; });
    validate_shift(shift);
    cohort.participants[it->second].shifts.push_back(std::move(shift));
  }

  for (const auto& rel : survey_paths) {
    const auto path = options.base_dir / rel;
    if (!std::filesystem::is_regular_file(path)) fail(ErrorCode::DanglingRecordingRef, "survey file " + rel);
    for (auto& [pid, survey] : parse_surveys(text::read_file(path))) {
      auto it = participant_at.find(pid);
      if (it != participant_at.end()) cohort.participants[it->second].surveys = survey;
    }
  }
  return cohort;
}

inline std::filesystem::path feature_path_for(std::string_view recording_id) {
  return std::filesystem::path("features") / (std::string(recording_id) + ".csv");
}

/// Manifest text for `cohort`, with feature files at feature_path_for(id)
/// and surveys at surveys.csv.
inline std::string serialize_manifest(const Cohort& cohort) {
  std::string out;
  auto emit = [&out](const nlohmann::ordered_json& j) { (out += j.dump()) += '\n'; };
  for (const auto& p : cohort.participants) {
    emit({{"type", "participant"},
          {"participant_id", p.participant_id},
          {"sex", to_string(p.sex)},
          {"age_group", to_string(p.age_group)},
          {"work_unit", to_string(p.work_unit)},
          {"primary_shift", to_string(p.primary_shift)}});
  }
  for (const auto& p : cohort.participants)
    for (const auto& s : p.shifts) {
      emit({{"type", "shift"},
            {"participant_id", p.participant_id},
            {"shift_id", s.shift_id},
            {"shift_type", to_string(s.shift_type)},
            {"start_time", s.start_time},
            {"duration_hours", s.duration_hours}});
      for (const auto& r : s.recordings)
        emit({{"type", "recording"},
              {"shift_id", s.shift_id},
              {"recording_id", r.recording_id},
              {"minute_index", r.minute_index},
              {"features", feature_path_for(r.recording_id).generic_string()}});
    }
  emit({{"type", "surveys"}, {"path", "surveys.csv"}});
  return out;
}

/// Writes manifest.jsonl, surveys.csv and one feature file per recording.
inline void write_cohort(const Cohort& cohort, const std::filesystem::path& dir, const FeatureFileFormat& format = {}) {
  std::filesystem::create_directories(dir / "features");
  for (const auto& p : cohort.participants)
    for (const auto& s : p.shifts)
      for (const auto& r : s.recordings) text::write_file(dir / feature_path_for(r.recording_id), serialize_recording(r, format));
  text::write_file(dir / "surveys.csv", serialize_surveys(cohort));
  text::write_file(dir / "manifest.jsonl", serialize_manifest(cohort));
}

inline Cohort read_cohort(const std::filesystem::path& dir, const FeatureFileFormat& format = {}) {
  return parse_manifest(text::read_file(dir / "manifest.jsonl"), {dir, format});
}

/// A labelled recording paired with teacher posteriors, for diarizer training.
struct CorpusItem {
  Recording recording;
  std::optional<TeacherPosteriors> teacher;
};

// Corpus manifest lines: {"recording_id","features","teacher"?}
inline std::vector<CorpusItem> parse_corpus_manifest(std::string_view bytes, const ManifestOptions& options = {}) {
  std::vector<CorpusItem> items;
  std::set<std::string> ids;
  for (const auto& [lineno, line] : text::lines(bytes)) {
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::MalformedManifest, "corpus line " + std::to_string(lineno) + ": " + e.what());
    }
    CorpusItem item;
    const auto id = detail::json_string(obj, "recording_id", lineno);
    if (!ids.insert(id).second) fail(ErrorCode::MalformedManifest, "duplicate recording_id " + id);
    const auto features = options.base_dir / detail::json_string(obj, "features", lineno);
    if (!std::filesystem::is_regular_file(features)) fail(ErrorCode::DanglingRecordingRef, id + " -> features");
    item.recording = parse_recording(text::read_file(features), options.format, id, 0);
    if (obj.contains("teacher")) {
      const auto teacher = options.base_dir / detail::json_string(obj, "teacher", lineno);
      if (!std::filesystem::is_regular_file(teacher)) fail(ErrorCode::DanglingRecordingRef, id + " -> teacher");
      item.teacher = parse_teacher(text::read_file(teacher), id);
      check_alignment(*item.teacher, item.recording);
    }
    items.push_back(std::move(item));
  }
  return items;
}

inline void write_corpus(std::span<const CorpusItem> items, const std::filesystem::path& dir) {
  std::string manifest;
  for (const auto& item : items) {
    const auto& id = item.recording.recording_id;
    nlohmann::ordered_json j{{"recording_id", id}, {"features", feature_path_for(id).generic_string()}};
    text::write_file(dir / feature_path_for(id), serialize_recording(item.recording));
    if (item.teacher) {
      const auto rel = std::filesystem::path("teacher") / (id + ".csv");
      j["teacher"] = rel.generic_string();
      text::write_file(dir / rel, serialize_teacher(*item.teacher, item.recording.frames));
    }
    (manifest += j.dump()) += '\n';
  }
  text::write_file(dir / "manifest.jsonl", manifest);
}

/// Participants with at least `min_shifts` shifts that hold a recording.
inline Cohort filter_compliant(const Cohort& cohort, int min_shifts) {
  Cohort out;
  for (const auto& p : cohort.participants) {
    const auto recorded = std::count_if(p.shifts.begin(), p.shifts.end(),
                                        [](const Shift& s) { return !s.recordings.empty(); });
    if (recorded >= min_shifts) out.participants.push_back(p);
  }
  return out;
}

}  // namespace egocomm
