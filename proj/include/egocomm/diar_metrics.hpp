#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "egocomm/error.hpp"
#include "egocomm/types.hpp"

namespace egocomm {

/// Frame-level diarization error decomposition. Rates are frame counts
/// divided by the number of reference speech (FG or BG) frames, so der can
/// exceed 1.
struct DiarizationScore {
  double miss = 0.0;
  double false_alarm = 0.0;
  double confusion = 0.0;
  double der = 0.0;
  std::size_t ref_speech_frames = 0;
  std::size_t total_frames = 0;
  std::size_t miss_frames = 0;
  std::size_t false_alarm_frames = 0;
  std::size_t confusion_frames = 0;
};

namespace detail {
inline DiarizationScore from_counts(std::size_t miss, std::size_t fa, std::size_t conf, std::size_t ref_speech,
                                    std::size_t total) {
  DiarizationScore s;
  s.miss_frames = miss;
  s.false_alarm_frames = fa;
  s.confusion_frames = conf;
  s.ref_speech_frames = ref_speech;
  s.total_frames = total;
  const double denom = static_cast<double>(ref_speech);
  s.miss = static_cast<double>(miss) / denom;
  s.false_alarm = static_cast<double>(fa) / denom;
  s.confusion = static_cast<double>(conf) / denom;
  s.der = s.miss + s.false_alarm + s.confusion;
  return s;
}
}  // namespace detail

/// Scores hypothesis labels against reference labels frame by frame; no collar.
inline DiarizationScore score(std::span<const FrameClass> reference, std::span<const FrameClass> hypothesis) {
  if (reference.size() != hypothesis.size())
    fail(ErrorCode::LengthMismatch, std::to_string(reference.size()) + " reference vs " +
                                        std::to_string(hypothesis.size()) + " hypothesis frames");
  std::size_t miss = 0, fa = 0, conf = 0, ref_speech = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const FrameClass r = reference[i], h = hypothesis[i];
    if (is_speech(r)) {
      ++ref_speech;
      if (h == FrameClass::S)
        ++miss;
      else if (h != r)
        ++conf;
    } else if (is_speech(h)) {
      ++fa;
    }
  }
  if (ref_speech == 0) fail(ErrorCode::NoReferenceSpeech, "reference contains no FG or BG frames");
  return detail::from_counts(miss, fa, conf, ref_speech, reference.size());
}

/// Micro-average: pools the underlying frame counts. A per-score weight
/// replicates that score's counts (weight 1 is plain pooling).
inline DiarizationScore aggregate(std::span<const DiarizationScore> scores, std::span<const std::size_t> weights = {}) {
  if (scores.empty()) fail(ErrorCode::EmptyList, "no scores to aggregate");
  if (!weights.empty() && weights.size() != scores.size())
    fail(ErrorCode::LengthMismatch, "weights and scores differ in length");
  std::size_t miss = 0, fa = 0, conf = 0, ref = 0, total = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const std::size_t w = weights.empty() ? 1 : weights[i];
    miss += w * scores[i].miss_frames;
    fa += w * scores[i].false_alarm_frames;
    conf += w * scores[i].confusion_frames;
    ref += w * scores[i].ref_speech_frames;
    total += w * scores[i].total_frames;
  }
  if (ref == 0) fail(ErrorCode::NoReferenceSpeech, "pooled reference contains no speech");
  return detail::from_counts(miss, fa, conf, ref, total);
}

/// Macro-average: unweighted mean of per-recording rates. Frame counts are
/// summed, so only the rate fields differ from aggregate().
inline DiarizationScore aggregate_macro(std::span<const DiarizationScore> scores) {
  if (scores.empty()) fail(ErrorCode::EmptyList, "no scores to aggregate");
  DiarizationScore out = aggregate(scores);
  const double n = static_cast<double>(scores.size());
  out.miss = out.false_alarm = out.confusion = 0.0;
  for (const auto& s : scores) {
    out.miss += s.miss / n;
    out.false_alarm += s.false_alarm / n;
    out.confusion += s.confusion / n;
  }
  out.der = out.miss + out.false_alarm + out.confusion;
  return out;
}

}  // namespace egocomm
