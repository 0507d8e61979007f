#pragma once

// Seeded synthetic data: labelled frame streams with teacher posteriors for
// diarizer training, and cohorts with planted group effects.
//
// Seeds for sub-entities are derived with splitmix64:
//   derive_seed(base, a, b, ...) = mix(...mix(mix(base) ^ a) ^ b ...)
// so participant i, shift k, recording j always draw from the same stream
// regardless of how many entities are generated around them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "egocomm/behavior.hpp"
#include "egocomm/error.hpp"
#include "egocomm/io.hpp"
#include "egocomm/types.hpp"

namespace egocomm::synth {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base) { return splitmix64(base); }

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, Tags... rest) {
  return derive_seed(splitmix64(base) ^ tag, static_cast<std::uint64_t>(rest)...);
}

using Rng = std::mt19937_64;
using ClassOffsets = std::array<std::array<double, kNumMfcc>, kNumClasses>;

/// MFCC mean patterns per class, scaled by `amplitude`. FG and BG differ in
/// the low coefficients, silence sits apart on the high ones.
inline ClassOffsets default_offsets(double amplitude) {
  ClassOffsets o{};
  for (std::size_t k = 0; k < kNumMfcc; ++k) {
    o[0][k] = k < 4 ? amplitude : (k < 8 ? -0.5 * amplitude : 0.0);
    o[1][k] = k < 4 ? -amplitude : (k < 8 ? 0.5 * amplitude : 0.0);
    o[2][k] = k < 8 ? 0.0 : -1.5 * amplitude;
  }
  return o;
}

struct StreamConfig {
  double fg_rate = 0.4;
  double bg_rate = 0.3;
  int mean_segment_frames = 60;
  ClassOffsets class_feature_offsets = default_offsets(1.0);
  double noise_sd = 1.0;
  double teacher_accuracy = 0.95;

  /// Widely separated classes with little noise.
  static StreamConfig easy() {
    StreamConfig c;
    c.class_feature_offsets = default_offsets(3.0);
    c.noise_sd = 0.5;
    return c;
  }
};

inline void validate(const StreamConfig& c) {
  if (!(c.fg_rate >= 0.0 && c.fg_rate <= 1.0) || !(c.bg_rate >= 0.0 && c.bg_rate <= 1.0) ||
      c.fg_rate + c.bg_rate > 1.0)
    fail(ErrorCode::BadConfig, "fg_rate and bg_rate must lie in [0,1] and sum to at most 1");
  if (c.mean_segment_frames < 1) fail(ErrorCode::BadConfig, "mean_segment_frames must be >= 1");
  if (!(c.noise_sd > 0.0)) fail(ErrorCode::BadConfig, "noise_sd must be > 0");
  if (!(c.teacher_accuracy > 1.0 / 3.0 && c.teacher_accuracy <= 1.0))
    fail(ErrorCode::BadConfig, "teacher_accuracy must be in (1/3, 1]");
}

/// A labelled frame sequence of arbitrary length with aligned teacher rows.
struct LabeledStream {
  std::vector<FrameFeatures> frames;
  std::vector<FrameClass> labels;
  std::vector<Posterior> teacher;
};

namespace detail {

inline double uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
inline double normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

/// Non-MFCC descriptors for one frame. `arousal` shifts FG speech upward.
inline void fill_prosody(FrameFeatures& f, FrameClass c, double arousal, double pitch_base, Rng& rng) {
  switch (c) {
    case FrameClass::FG:
      if (uniform(rng) < 0.9) f.log_pitch = pitch_base + 0.08 * arousal + normal(rng, 0.0, 0.05);
      f.intensity = std::exp(0.3 * arousal + normal(rng, 0.0, 0.2));
      f.hf_lf_ratio = std::exp(-0.5 + 0.25 * arousal + normal(rng, 0.0, 0.2));
      break;
    case FrameClass::BG:
      if (uniform(rng) < 0.7) f.log_pitch = std::log(130.0) + normal(rng, 0.0, 0.15);
      f.intensity = std::exp(-1.0 + normal(rng, 0.0, 0.3));
      f.hf_lf_ratio = std::exp(-0.8 + normal(rng, 0.0, 0.3));
      break;
    case FrameClass::S:
      f.intensity = std::exp(-3.0 + normal(rng, 0.0, 0.5));
      f.hf_lf_ratio = std::exp(-1.5 + normal(rng, 0.0, 0.5));
      break;
  }
}

inline void fill_mfcc(FrameFeatures& f, FrameClass c, const ClassOffsets& offsets, double noise_sd, Rng& rng) {
  const auto& mu = offsets[static_cast<std::size_t>(c)];
  for (std::size_t k = 0; k < kNumMfcc; ++k) f.mfcc[k] = mu[k] + normal(rng, 0.0, noise_sd);
}

/// One-hot on the label with probability `accuracy`; otherwise a point
/// peaked on a uniformly chosen wrong class.
inline Posterior teacher_row(FrameClass label, double accuracy, Rng& rng) {
  Posterior p{};
  const auto y = static_cast<std::size_t>(label);
  if (uniform(rng) < accuracy) {
    p[y] = 1.0;
    return p;
  }
  const std::size_t wrong = (y + 1 + (uniform(rng) < 0.5 ? 0 : 1)) % kNumClasses;
  const double peak = 0.5 + 0.4 * uniform(rng);
  const double split = uniform(rng);
  p[wrong] = peak;
  const std::size_t other = 3 - y - wrong;
  p[y] = (1.0 - peak) * split;
  p[other] = 1.0 - peak - p[y];
  return p;
}

}  // namespace detail

/// Semi-Markov label chain (segment classes drawn with probabilities
/// fg_rate, bg_rate, 1 - fg_rate - bg_rate; geometric lengths with mean
/// mean_segment_frames), class-offset MFCCs with Gaussian noise, and a
/// corrupted teacher.
inline LabeledStream gen_stream(const StreamConfig& config, std::size_t n_frames, std::uint64_t seed) {
  validate(config);
  if (n_frames < 1) fail(ErrorCode::BadConfig, "n_frames must be >= 1");
  Rng rng(derive_seed(seed, 0x57A3));
  std::geometric_distribution<int> seg_len(1.0 / static_cast<double>(config.mean_segment_frames));
  LabeledStream s;
  s.frames.reserve(n_frames);
  s.labels.reserve(n_frames);
  s.teacher.reserve(n_frames);
  const double pitch_base = std::log(210.0);
  while (s.labels.size() < n_frames) {
    const double u = detail::uniform(rng);
    const FrameClass c = u < config.fg_rate                   ? FrameClass::FG
                         : u < config.fg_rate + config.bg_rate ? FrameClass::BG
                                                               : FrameClass::S;
    const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(seg_len(rng)) + 1, n_frames - s.labels.size());
    for (std::size_t i = 0; i < len; ++i) s.labels.push_back(c);
  }
  for (std::size_t t = 0; t < n_frames; ++t) {
    FrameFeatures f;
    f.frame_index = static_cast<std::int64_t>(t);
    detail::fill_mfcc(f, s.labels[t], config.class_feature_offsets, config.noise_sd, rng);
    detail::fill_prosody(f, s.labels[t], 0.0, pitch_base, rng);
    s.frames.push_back(f);
    s.teacher.push_back(detail::teacher_row(s.labels[t], config.teacher_accuracy, rng));
  }
  return s;
}

/// Cuts a stream into labelled recordings of at most `frames_per_recording`
/// frames, each paired with its teacher rows. Frame indices restart at 0.
inline std::vector<CorpusItem> to_corpus(const LabeledStream& stream, const std::string& id_prefix,
                                         std::size_t frames_per_recording = kMaxFramesPerRecording) {
  if (frames_per_recording < 1 || frames_per_recording > kMaxFramesPerRecording)
    fail(ErrorCode::BadConfig, "frames_per_recording must be in [1, 2000]");
  std::vector<CorpusItem> out;
  for (std::size_t b = 0, k = 0; b < stream.frames.size(); b += frames_per_recording, ++k) {
    const std::size_t e = std::min(stream.frames.size(), b + frames_per_recording);
    CorpusItem item;
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "_%05zu", k);
    item.recording.recording_id = id_prefix + suffix;
    item.recording.frames.assign(stream.frames.begin() + static_cast<std::ptrdiff_t>(b),
                                 stream.frames.begin() + static_cast<std::ptrdiff_t>(e));
    for (std::size_t t = 0; t < item.recording.frames.size(); ++t)
      item.recording.frames[t].frame_index = static_cast<std::int64_t>(t);
    item.recording.labels.emplace(stream.labels.begin() + static_cast<std::ptrdiff_t>(b),
                                  stream.labels.begin() + static_cast<std::ptrdiff_t>(e));
    TeacherPosteriors tp;
    tp.recording_id = item.recording.recording_id;
    tp.rows.assign(stream.teacher.begin() + static_cast<std::ptrdiff_t>(b),
                   stream.teacher.begin() + static_cast<std::ptrdiff_t>(e));
    item.teacher = std::move(tp);
    out.push_back(std::move(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cohorts

struct CellSpec {
  WorkUnit unit = WorkUnit::NonICU;
  ShiftType shift = ShiftType::Day;
  int n_participants = 0;
};

struct CohortConfig {
  std::vector<CellSpec> cells;
  int shifts_per_participant = 5;
  // Participants drawn as non-compliant get between 1 and
  // shifts_per_participant - 1 shifts.
  double noncompliant_fraction = 0.0;
  double day_shift_hours = 12.0;
  double night_shift_hours = 12.0;
  int frames_per_recording = 2000;
  int min_fg_frames = kDefaultMinFgFrames;  // qualifying threshold the generator plants around

  // Speaking frequency (sessions per hour).
  double base_rate = 3.6;
  double day_night_rate_delta = 0.0;  // added to day-shift participants
  double participant_rate_sd = 0.3;

  // Session duration (minutes).
  double base_duration_min = 5.5;
  std::map<WorkUnit, double> unit_duration_deltas;
  double participant_duration_sd = 0.3;

  // Recordings with too little FG speech to qualify, per hour.
  double idle_recordings_per_hour = 4.0;

  // Night shifts: mean latent arousal of the second half minus the first.
  double arousal_halflife_slope = 0.0;

  // Latent correlations between a participant's speaking rate and surveys.
  std::map<WorkUnit, double> freq_irb_slope;
  std::map<ShiftType, double> freq_stai_slope;

  StreamConfig acoustics;
  std::uint64_t seed = 1;
};

inline void validate(const CohortConfig& c) {
  for (const auto& cell : c.cells)
    if (cell.n_participants < 0) fail(ErrorCode::BadConfig, "cell participant counts must be >= 0");
  if (c.shifts_per_participant < 1) fail(ErrorCode::BadConfig, "shifts_per_participant must be >= 1");
  if (!(c.noncompliant_fraction >= 0.0 && c.noncompliant_fraction <= 1.0))
    fail(ErrorCode::BadConfig, "noncompliant_fraction must be in [0,1]");
  if (!(c.day_shift_hours > 0.0) || !(c.night_shift_hours > 0.0))
    fail(ErrorCode::BadConfig, "shift hours must be > 0");
  if (c.frames_per_recording < 1 || c.frames_per_recording > static_cast<int>(kMaxFramesPerRecording))
    fail(ErrorCode::BadConfig, "frames_per_recording must be in [1, 2000]");
  if (c.min_fg_frames < 1 || c.min_fg_frames * 5 > c.frames_per_recording * 4)
    fail(ErrorCode::BadConfig, "min_fg_frames must be >= 1 and at most 80% of frames_per_recording");
  if (!(c.base_rate > 0.0) || !(c.base_duration_min >= 1.0))
    fail(ErrorCode::BadConfig, "base_rate must be > 0 and base_duration_min >= 1");
  if (c.participant_rate_sd < 0.0 || c.participant_duration_sd < 0.0 || c.idle_recordings_per_hour < 0.0)
    fail(ErrorCode::BadConfig, "standard deviations and idle rate must be >= 0");
  for (const auto& [unit, r] : c.freq_irb_slope)
    if (!(r >= -1.0 && r <= 1.0)) fail(ErrorCode::BadConfig, "freq_irb_slope must be in [-1,1]");
  for (const auto& [shift, r] : c.freq_stai_slope)
    if (!(r >= -1.0 && r <= 1.0)) fail(ErrorCode::BadConfig, "freq_stai_slope must be in [-1,1]");
  validate(c.acoustics);
}

/// What the generator planted for one participant.
struct ParticipantTruth {
  std::string participant_id;
  WorkUnit unit = WorkUnit::NonICU;
  ShiftType shift = ShiftType::Day;
  double rate = 0.0;      // expected sessions per hour
  double duration = 0.0;  // expected session length, minutes
  double rate_z = 0.0;    // standardized deviation from the cell's planted rate
  int n_shifts = 0;
};

struct GroundTruth {
  double day_night_rate_delta = 0.0;
  std::map<WorkUnit, double> unit_duration_deltas;
  double arousal_halflife_slope = 0.0;
  std::map<WorkUnit, double> freq_irb_slope;
  std::map<ShiftType, double> freq_stai_slope;
  std::vector<ParticipantTruth> participants;
};

/// Generates cohort participants one at a time; participant(i) is a pure
/// function of (config, i).
class CohortGenerator {
 public:
  explicit CohortGenerator(CohortConfig config) : config_(std::move(config)) {
    validate(config_);
    for (const auto& cell : config_.cells)
      for (int i = 0; i < cell.n_participants; ++i) slots_.push_back(cell);
  }

  std::size_t size() const { return slots_.size(); }
  const CohortConfig& config() const { return config_; }

  Participant participant(std::size_t index, ParticipantTruth* truth = nullptr) const {
    const CellSpec& cell = slots_.at(index);
    Rng rng(derive_seed(config_.seed, 0xC0407, index));
    Participant p;
    char id[16];
    std::snprintf(id, sizeof id, "P%04zu", index + 1);
    p.participant_id = id;
    p.work_unit = cell.unit;
    p.primary_shift = cell.shift;
    p.sex = detail::uniform(rng) < 0.5 ? Sex::Female : Sex::Male;
    p.age_group = kAllAgeGroups[std::min<std::size_t>(2, static_cast<std::size_t>(detail::uniform(rng) * 3.0))];

    const double z_rate = detail::normal(rng);
    const double z_dur = detail::normal(rng);
    const double cell_rate = config_.base_rate + (cell.shift == ShiftType::Day ? config_.day_night_rate_delta : 0.0);
    const double rate = std::max(0.2, cell_rate + config_.participant_rate_sd * z_rate);
    double unit_delta = 0.0;
    if (auto it = config_.unit_duration_deltas.find(cell.unit); it != config_.unit_duration_deltas.end())
      unit_delta = it->second;
    const double duration = std::max(1.0, config_.base_duration_min + unit_delta + config_.participant_duration_sd * z_dur);
    const double pitch_base = std::log(180.0) + 0.2 * detail::normal(rng);

    int n_shifts = config_.shifts_per_participant;
    if (config_.noncompliant_fraction > 0.0 && detail::uniform(rng) < config_.noncompliant_fraction &&
        config_.shifts_per_participant > 1)
      n_shifts = 1 + static_cast<int>(detail::uniform(rng) * (config_.shifts_per_participant - 1));

    p.surveys.irb_total = survey_score(rng, slope_for(config_.freq_irb_slope, cell.unit), z_rate, 38.0, 5.0, 7, 49);
    p.surveys.stai_total = survey_score(rng, slope_for(config_.freq_stai_slope, cell.shift), z_rate, 80.0, 15.0, 40, 160);

    for (int k = 0; k < n_shifts; ++k)
      p.shifts.push_back(make_shift(p.participant_id, index, k, cell.shift, rate, duration, pitch_base));

    if (truth) *truth = {p.participant_id, cell.unit, cell.shift, rate, duration, z_rate, n_shifts};
    return p;
  }

 private:
  template <typename Key>
  static double slope_for(const std::map<Key, double>& m, Key k) {
    auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
  }

  static int survey_score(Rng& rng, double r, double z, double mean, double sd, int lo, int hi) {
    const double latent = r * z + std::sqrt(std::max(0.0, 1.0 - r * r)) * detail::normal(rng);
    return std::clamp(static_cast<int>(std::lround(mean + sd * latent)), lo, hi);
  }

  /// Labels with exactly `fg` FG and `bg` BG frames, arranged in segments.
  static std::vector<FrameClass> arrange_labels(std::size_t n, std::size_t fg, std::size_t bg, int mean_seg, Rng& rng) {
    std::array<std::size_t, kNumClasses> left{fg, bg, n - fg - bg};
    std::geometric_distribution<int> seg(1.0 / static_cast<double>(std::max(mean_seg, 1)));
    std::vector<FrameClass> out;
    out.reserve(n);
    std::optional<std::size_t> prev;
    while (out.size() < n) {
      double total = 0.0;
      for (std::size_t c = 0; c < kNumClasses; ++c)
        if (c != prev || left[c] == n - out.size()) total += static_cast<double>(left[c]);
      double u = detail::uniform(rng) * total;
      std::size_t pick = kNumClasses;
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (!(c != prev || left[c] == n - out.size()) || left[c] == 0) continue;
        pick = c;
        if (u < static_cast<double>(left[c])) break;
        u -= static_cast<double>(left[c]);
      }
      const std::size_t len = std::min<std::size_t>(left[pick], static_cast<std::size_t>(seg(rng)) + 1);
      out.insert(out.end(), len, static_cast<FrameClass>(pick));
      left[pick] -= len;
      prev = pick;
    }
    return out;
  }

  Recording make_recording(const std::string& id, std::int64_t minute, std::size_t fg, double arousal,
                           double pitch_base, Rng& rng) const {
    const auto n = static_cast<std::size_t>(config_.frames_per_recording);
    const std::size_t remaining = n - fg;
    const auto bg = static_cast<std::size_t>(detail::uniform(rng) * 0.5 * static_cast<double>(remaining));
    Recording r;
    r.recording_id = id;
    r.minute_index = minute;
    auto labels = arrange_labels(n, fg, bg, config_.acoustics.mean_segment_frames, rng);
    r.frames.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      auto& f = r.frames[t];
      f.frame_index = static_cast<std::int64_t>(t);
      detail::fill_mfcc(f, labels[t], config_.acoustics.class_feature_offsets, config_.acoustics.noise_sd, rng);
      detail::fill_prosody(f, labels[t], arousal, pitch_base, rng);
    }
    r.labels = std::move(labels);
    return r;
  }

  Shift make_shift(const std::string& pid, std::size_t p_index, int k, ShiftType type, double rate, double duration,
                   double pitch_base) const {
    Rng rng(derive_seed(config_.seed, 0x5A1F7, p_index, static_cast<std::uint64_t>(k)));
    Shift s;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_S%02d", pid.c_str(), k + 1);
    s.shift_id = buf;
    s.shift_type = type;
    std::snprintf(buf, sizeof buf, "2026-01-%02dT%s:00:00Z", 1 + k % 28, type == ShiftType::Day ? "07" : "19");
    s.start_time = buf;
    s.duration_hours = type == ShiftType::Day ? config_.day_shift_hours : config_.night_shift_hours;
    const auto minutes = static_cast<std::int64_t>(std::floor(s.duration_hours * 60.0));

    // Session count: floor(rate * hours + U), so its variance stays below 1/4.
    auto n_sessions = static_cast<std::int64_t>(std::floor(rate * s.duration_hours + detail::uniform(rng)));
    std::geometric_distribution<int> extra_len(1.0 / duration);
    std::vector<std::int64_t> lengths;
    std::int64_t occupied = 0;
    for (std::int64_t i = 0; i < n_sessions; ++i) {
      const std::int64_t len = 1 + extra_len(rng);
      if (occupied + len + static_cast<std::int64_t>(lengths.size()) > minutes) break;
      lengths.push_back(len);
      occupied += len;
    }
    n_sessions = static_cast<std::int64_t>(lengths.size());
    const std::int64_t free = minutes - occupied - std::max<std::int64_t>(0, n_sessions - 1);

    // Spread the free minutes over the n_sessions + 1 gaps.
    std::vector<double> w(static_cast<std::size_t>(n_sessions + 1));
    double wsum = 0.0;
    for (double& x : w) wsum += (x = -std::log(1.0 - detail::uniform(rng)));
    std::vector<std::int64_t> gaps(w.size());
    std::int64_t assigned = 0;
    for (std::size_t g = 0; g < w.size(); ++g) assigned += (gaps[g] = static_cast<std::int64_t>(std::floor(free * w[g] / wsum)));
    gaps.back() += free - assigned;

    std::vector<std::pair<std::int64_t, std::int64_t>> spans;  // [start, end)
    std::int64_t cursor = gaps[0];
    for (std::int64_t i = 0; i < n_sessions; ++i) {
      spans.emplace_back(cursor, cursor + lengths[static_cast<std::size_t>(i)]);
      cursor += lengths[static_cast<std::size_t>(i)] + 1 + gaps[static_cast<std::size_t>(i + 1)];
    }

    std::vector<bool> busy(static_cast<std::size_t>(minutes), false);
    for (auto [b, e] : spans)
      for (auto m = b; m < e; ++m) busy[static_cast<std::size_t>(m)] = true;

    const auto n = static_cast<std::size_t>(config_.frames_per_recording);
    const auto min_fg = static_cast<std::size_t>(config_.min_fg_frames);
    const std::size_t fg_lo = min_fg + (n - min_fg) / 10;
    const std::size_t fg_hi = std::max(fg_lo, n * 4 / 5);
    const double slope = type == ShiftType::Night ? 2.0 * config_.arousal_halflife_slope : 0.0;
    const double shift_level = 0.3 * detail::normal(rng);
    auto arousal_at = [&](std::int64_t m) {
      return shift_level + slope * (static_cast<double>(m) / static_cast<double>(minutes) - 0.5) + detail::normal(rng);
    };

    std::map<std::int64_t, Recording> recs;
    auto rec_id = [&](std::int64_t m) {
      char id[80];
      std::snprintf(id, sizeof id, "%s_m%04lld", s.shift_id.c_str(), static_cast<long long>(m));
      return std::string(id);
    };
    for (auto [b, e] : spans)
      for (auto m = b; m < e; ++m) {
        const auto fg = fg_lo + static_cast<std::size_t>(detail::uniform(rng) * static_cast<double>(fg_hi - fg_lo + 1));
        recs.emplace(m, make_recording(rec_id(m), m, std::min(fg, fg_hi), arousal_at(m), pitch_base, rng));
      }

    // Idle recordings land on free minutes not adjacent to a session.
    std::vector<std::int64_t> idle_slots;
    for (std::int64_t m = 0; m < minutes; ++m) {
      const bool near = busy[static_cast<std::size_t>(m)] || (m > 0 && busy[static_cast<std::size_t>(m - 1)]) ||
                        (m + 1 < minutes && busy[static_cast<std::size_t>(m + 1)]);
      if (!near) idle_slots.push_back(m);
    }
    std::shuffle(idle_slots.begin(), idle_slots.end(), rng);
    const auto n_idle = std::min<std::size_t>(
        idle_slots.size(),
        static_cast<std::size_t>(std::floor(config_.idle_recordings_per_hour * s.duration_hours + detail::uniform(rng))));
    const std::size_t idle_hi = min_fg / 2;
    for (std::size_t i = 0; i < n_idle; ++i) {
      const auto m = idle_slots[i];
      const auto fg = static_cast<std::size_t>(detail::uniform(rng) * static_cast<double>(idle_hi + 1));
      recs.emplace(m, make_recording(rec_id(m), m, std::min(fg, idle_hi), arousal_at(m), pitch_base, rng));
    }

    for (auto& [m, r] : recs) s.recordings.push_back(std::move(r));
    return s;
  }

  CohortConfig config_;
  std::vector<CellSpec> slots_;
};

inline GroundTruth planted(const CohortConfig& c) {
  GroundTruth g;
  g.day_night_rate_delta = c.day_night_rate_delta;
  g.unit_duration_deltas = c.unit_duration_deltas;
  g.arousal_halflife_slope = c.arousal_halflife_slope;
  g.freq_irb_slope = c.freq_irb_slope;
  g.freq_stai_slope = c.freq_stai_slope;
  return g;
}

/// Materializes the whole cohort in memory.
inline std::pair<Cohort, GroundTruth> gen_cohort(const CohortConfig& config) {
  CohortGenerator gen(config);
  std::pair<Cohort, GroundTruth> out;
  out.second = planted(config);
  for (std::size_t i = 0; i < gen.size(); ++i) {
    ParticipantTruth t;
    out.first.participants.push_back(gen.participant(i, &t));
    out.second.participants.push_back(t);
  }
  return out;
}

}  // namespace egocomm::synth
