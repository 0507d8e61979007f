#pragma once

// Rule-based vocal arousal relative to a speaker's own baseline.
//
// For each feature (log-pitch, intensity, HF/LF ratio) a personalized
// empirical model N holds one sample per recording: the median of that
// feature over the recording's FG frames. A recording with feature median x
// scores
//
//   p = 2 * E[x > N] - 1,   E[x > N] = (#{s < x} + 0.5 * #{s == x}) / |N|
//
// and the three per-feature score vectors are fused with weights
// proportional to each vector's Spearman correlation with their mean.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egocomm/behavior.hpp"
#include "egocomm/error.hpp"
#include "egocomm/stats.hpp"
#include "egocomm/types.hpp"

namespace egocomm {

enum class FeatureKind : std::uint8_t { LogPitch = 0, Intensity = 1, HfLfRatio = 2 };
inline constexpr std::array kAllFeatureKinds{FeatureKind::LogPitch, FeatureKind::Intensity, FeatureKind::HfLfRatio};
inline constexpr std::size_t kNumArousalFeatures = 3;
inline constexpr int kDefaultMinModelSize = 20;
inline constexpr double kDefaultArousalQuantile = 0.9;

inline constexpr std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::LogPitch: return "log_pitch";
    case FeatureKind::Intensity: return "intensity";
    case FeatureKind::HfLfRatio: return "hf_lf_ratio";
  }
  return "?";
}

struct EmpiricalModel {
  FeatureKind feature_kind = FeatureKind::LogPitch;
  std::vector<double> samples;  // ascending
};

inline std::optional<double> feature_value(const FrameFeatures& f, FeatureKind kind) {
  switch (kind) {
    case FeatureKind::LogPitch: return f.log_pitch;
    case FeatureKind::Intensity: return f.intensity;
    case FeatureKind::HfLfRatio: return f.hf_lf_ratio;
  }
  return std::nullopt;
}

inline double median(std::vector<double> v) {
  if (v.empty()) fail(ErrorCode::InsufficientData, "median of empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Median of a feature over FG frames; empty when no FG frame carries a value
/// (unvoiced frames carry no log-pitch).
inline std::optional<double> fg_median(const Recording& rec, std::span<const FrameClass> labels, FeatureKind kind) {
  if (labels.size() != rec.frames.size()) fail(ErrorCode::LengthMismatch, rec.recording_id + ": labels vs frames");
  std::vector<double> values;
  for (std::size_t t = 0; t < rec.frames.size(); ++t) {
    if (labels[t] != FrameClass::FG) continue;
    if (auto v = feature_value(rec.frames[t], kind)) values.push_back(*v);
  }
  if (values.empty()) return std::nullopt;
  return median(std::move(values));
}

/// Builds N from per-recording medians; missing medians are skipped.
inline EmpiricalModel build_empirical_model(std::span<const std::optional<double>> per_recording_medians,
                                            FeatureKind kind, int min_model_size = kDefaultMinModelSize) {
  EmpiricalModel m;
  m.feature_kind = kind;
  for (const auto& v : per_recording_medians)
    if (v) m.samples.push_back(*v);
  if (m.samples.size() < static_cast<std::size_t>(std::max(min_model_size, 1)))
    fail(ErrorCode::InsufficientData, std::string(to_string(kind)) + ": " + std::to_string(m.samples.size()) +
                                          " recordings, need " + std::to_string(min_model_size));
  std::sort(m.samples.begin(), m.samples.end());
  return m;
}

/// Convenience overload over recordings and their frame labels.
inline EmpiricalModel build_empirical_model(std::span<const Recording* const> recordings, const LabelMap& labels,
                                            FeatureKind kind, int min_model_size = kDefaultMinModelSize) {
  std::vector<std::optional<double>> medians;
  for (const Recording* r : recordings) {
    const auto it = labels.find(r->recording_id);
    const std::vector<FrameClass>* lab = it != labels.end() ? &it->second : (r->labels ? &*r->labels : nullptr);
    if (!lab) fail(ErrorCode::MissingLabels, r->recording_id);
    medians.push_back(fg_median(*r, *lab, kind));
  }
  return build_empirical_model(medians, kind, min_model_size);
}

/// 2 * E[x > N] - 1 with half credit for ties.
inline double score_recording(double x, const EmpiricalModel& model) {
  const auto& s = model.samples;
  if (s.empty()) fail(ErrorCode::InsufficientData, "empty empirical model");
  const auto lo = std::lower_bound(s.begin(), s.end(), x);
  const auto hi = std::upper_bound(lo, s.end(), x);
  const double below = static_cast<double>(lo - s.begin());
  const double equal = static_cast<double>(hi - lo);
  const double e = (below + 0.5 * equal) / static_cast<double>(s.size());
  return 2.0 * e - 1.0;
}

struct FusionResult {
  std::array<double, kNumArousalFeatures> weights{};
  std::array<double, kNumArousalFeatures> correlations{};
  std::vector<double> mean_scores;  // elementwise mean of the three vectors
  std::vector<double> fused;
  bool fallback = false;            // all correlations zero; equal weights used
};

/// Spearman-weighted fusion. A constant score vector gets correlation 0;
/// if every correlation is 0 the weights fall back to 1/sqrt(3) each unless
/// `allow_fallback` is false, in which case DegenerateScores is thrown.
inline FusionResult fuse(const std::array<std::vector<double>, kNumArousalFeatures>& scores,
                         bool allow_fallback = true) {
  const std::size_t n = scores[0].size();
  for (const auto& v : scores)
    if (v.size() != n) fail(ErrorCode::LengthMismatch, "score vectors differ in length");
  if (n < 3) fail(ErrorCode::TooFewObservations, "fusion needs at least 3 recordings");

  FusionResult out;
  out.mean_scores.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    out.mean_scores[j] = (scores[0][j] + scores[1][j] + scores[2][j]) / 3.0;

  const bool mean_constant = stats::is_constant(out.mean_scores);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < kNumArousalFeatures; ++i) {
    out.correlations[i] =
        (mean_constant || stats::is_constant(scores[i])) ? 0.0 : stats::spearman(scores[i], out.mean_scores);
    norm2 += out.correlations[i] * out.correlations[i];
  }
  if (norm2 == 0.0) {
    if (!allow_fallback) fail(ErrorCode::DegenerateScores, "all Spearman correlations are zero");
    out.fallback = true;
    out.weights.fill(1.0 / std::sqrt(3.0));
  } else {
    const double norm = std::sqrt(norm2);
    for (std::size_t i = 0; i < kNumArousalFeatures; ++i) out.weights[i] = out.correlations[i] / norm;
  }
  out.fused.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < kNumArousalFeatures; ++i) out.fused[j] += out.weights[i] * scores[i][j];
  return out;
}

/// A fused arousal score stamped with the recording's place in its shift.
struct ScoredRecording {
  std::string recording_id;
  std::int64_t minute_index = 0;
  double fused = 0.0;
};

/// q-quantile (linear interpolation) of fused scores falling in one half.
inline double shift_half_percentile(const Shift& shift, std::span<const ScoredRecording> scores, ShiftHalf half,
                                    double q = kDefaultArousalQuantile) {
  std::vector<double> values;
  for (const auto& s : scores)
    if (half_of(shift, s.minute_index) == half) values.push_back(s.fused);
  if (values.empty()) fail(ErrorCode::EmptyHalf, shift.shift_id + " " + std::string(to_string(half)) + " half");
  return stats::quantile_linear(std::move(values), q);
}

struct HalfPercentiles {
  std::optional<double> first;
  std::optional<double> second;
};

/// Mean across shifts of each half's percentile, skipping empty halves.
inline HalfPercentiles participant_arousal_features(std::span<const HalfPercentiles> per_shift) {
  HalfPercentiles out;
  double first = 0.0, second = 0.0;
  std::size_t n_first = 0, n_second = 0;
  for (const auto& s : per_shift) {
    if (s.first) {
      first += *s.first;
      ++n_first;
    }
    if (s.second) {
      second += *s.second;
      ++n_second;
    }
  }
  if (n_first == 0 && n_second == 0) fail(ErrorCode::NoData, "no shift has arousal scores");
  if (n_first) out.first = first / static_cast<double>(n_first);
  if (n_second) out.second = second / static_cast<double>(n_second);
  return out;
}

// ---------------------------------------------------------------------------
// Per-participant driver

enum class ModelSource { AllFgRecordings, QualifyingOnly };

struct ArousalOptions {
  int min_model_size = kDefaultMinModelSize;
  double quantile = kDefaultArousalQuantile;
  int min_fg_frames = kDefaultMinFgFrames;
  ModelSource model_source = ModelSource::AllFgRecordings;
};

struct ShiftArousal {
  std::string shift_id;
  ShiftType shift_type = ShiftType::Day;
  HalfPercentiles p90;
  std::size_t n_first = 0;
  std::size_t n_second = 0;
};

struct ArousalProfile {
  std::array<EmpiricalModel, kNumArousalFeatures> models;
  std::array<std::vector<double>, kNumArousalFeatures> per_feature_scores;
  FusionResult fusion;
  std::vector<ScoredRecording> scored;  // parallel to fusion.fused
  std::vector<std::string> scored_shift_ids;
  std::vector<ShiftArousal> shifts;
  HalfPercentiles participant;
};

/// Runs model building, scoring, fusion and shift-half percentiles for one
/// participant. Scored recordings are those with at least min_fg_frames FG
/// frames and a value for all three features.
inline ArousalProfile participant_arousal(const Participant& participant, const LabelMap& labels,
                                          const ArousalOptions& options = {}) {
  struct Row {
    const Shift* shift;
    const Recording* rec;
    std::size_t fg;
    std::array<std::optional<double>, kNumArousalFeatures> medians;
  };
  std::vector<Row> rows;
  for (const auto& shift : participant.shifts)
    for (const auto& rec : shift.recordings) {
      const auto it = labels.find(rec.recording_id);
      const std::vector<FrameClass>* lab = it != labels.end() ? &it->second : (rec.labels ? &*rec.labels : nullptr);
      if (!lab) fail(ErrorCode::MissingLabels, rec.recording_id);
      Row row{&shift, &rec, count_class(*lab, FrameClass::FG), {}};
      for (std::size_t i = 0; i < kNumArousalFeatures; ++i) row.medians[i] = fg_median(rec, *lab, kAllFeatureKinds[i]);
      rows.push_back(row);
    }

  const auto min_fg = static_cast<std::size_t>(std::max(options.min_fg_frames, 0));
  ArousalProfile profile;
  for (std::size_t i = 0; i < kNumArousalFeatures; ++i) {
    std::vector<std::optional<double>> medians;
    for (const auto& r : rows)
      if (options.model_source == ModelSource::AllFgRecordings || r.fg >= min_fg) medians.push_back(r.medians[i]);
    profile.models[i] = build_empirical_model(medians, kAllFeatureKinds[i], options.min_model_size);
  }

  for (const auto& r : rows) {
    if (r.fg < min_fg) continue;
    if (!r.medians[0] || !r.medians[1] || !r.medians[2]) continue;
    for (std::size_t i = 0; i < kNumArousalFeatures; ++i)
      profile.per_feature_scores[i].push_back(score_recording(*r.medians[i], profile.models[i]));
    profile.scored.push_back({r.rec->recording_id, r.rec->minute_index, 0.0});
    profile.scored_shift_ids.push_back(r.shift->shift_id);
  }
  profile.fusion = fuse(profile.per_feature_scores);
  for (std::size_t j = 0; j < profile.scored.size(); ++j) profile.scored[j].fused = profile.fusion.fused[j];

  std::vector<HalfPercentiles> per_shift;
  for (const auto& shift : participant.shifts) {
    std::vector<ScoredRecording> mine;
    for (std::size_t j = 0; j < profile.scored.size(); ++j)
      if (profile.scored_shift_ids[j] == shift.shift_id) mine.push_back(profile.scored[j]);
    ShiftArousal sa;
    sa.shift_id = shift.shift_id;
    sa.shift_type = shift.shift_type;
    for (const auto& s : mine) (half_of(shift, s.minute_index) == ShiftHalf::First ? sa.n_first : sa.n_second)++;
    if (sa.n_first) sa.p90.first = shift_half_percentile(shift, mine, ShiftHalf::First, options.quantile);
    if (sa.n_second) sa.p90.second = shift_half_percentile(shift, mine, ShiftHalf::Second, options.quantile);
    per_shift.push_back(sa.p90);
    profile.shifts.push_back(std::move(sa));
  }
  profile.participant = participant_arousal_features(per_shift);
  return profile;
}

}  // namespace egocomm
