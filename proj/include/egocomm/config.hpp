#pragma once

// Pipeline configuration: an INI file with sections
//   [paths] [run] [gen] [stream] [train] [behavior] [arousal] [stats]
// Unknown sections or keys are rejected. Per-level maps use dotted keys,
// e.g. `unit_duration_delta.ICU = 0.5` or `freq_stai_slope.day = 0.4`.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "egocomm/arousal.hpp"
#include "egocomm/distill.hpp"
#include "egocomm/error.hpp"
#include "egocomm/hash.hpp"
#include "egocomm/stats.hpp"
#include "egocomm/synth.hpp"
#include "egocomm/text.hpp"

namespace egocomm {

inline constexpr const char* kDataRootEnv = "EGOCOMM_DATA_ROOT";

struct GenSettings {
  std::vector<WorkUnit> units{WorkUnit::ICU, WorkUnit::NonICU, WorkUnit::Lab};
  std::vector<ShiftType> shifts{ShiftType::Day, ShiftType::Night};
  int participants_per_cell = 2;
  synth::CohortConfig cohort;  // cells and seed are filled in at run time
  synth::StreamConfig stream;
  double offset_amplitude = 1.0;
  int train_frames = 40000;
  int heldout_frames = 20000;
  int corpus_frames_per_recording = 1000;

  GenSettings() {
    cohort.day_shift_hours = 2.0;
    cohort.night_shift_hours = 2.0;
    cohort.frames_per_recording = 300;
    cohort.day_night_rate_delta = 0.35;
    cohort.arousal_halflife_slope = 0.3;
    cohort.freq_irb_slope[WorkUnit::Lab] = -0.6;
    cohort.freq_stai_slope[ShiftType::Day] = 0.4;
  }
};

struct PipelineConfig {
  std::filesystem::path data_root;
  std::filesystem::path output_root;
  std::uint64_t seed = 1;
  int jobs = 1;

  GenSettings gen;

  TrainConfig train;
  int pretrain_epochs = 5;
  double pretrain_learning_rate = 1e-3;

  int min_fg_frames = kDefaultMinFgFrames;
  int min_shifts = kDefaultMinShifts;

  int min_model_size = kDefaultMinModelSize;
  double quantile = kDefaultArousalQuantile;
  ModelSource model_source = ModelSource::AllFgRecordings;

  stats::SsType ss_type = stats::SsType::TypeII;
  double ci_level = 0.95;
};

namespace detail {

inline double config_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!text::parse_double(text::trim(v), out)) fail(ErrorCode::ConfigError, key + ": not a number: '" + v + "'");
  return out;
}

inline int config_int(const std::string& key, const std::string& v) {
  int out = 0;
  if (!text::parse_int(text::trim(v), out)) fail(ErrorCode::ConfigError, key + ": not an integer: '" + v + "'");
  return out;
}

template <typename T, typename Parse>
std::vector<T> config_list(const std::string& key, const std::string& v, Parse parse) {
  std::vector<T> out;
  for (auto item : text::split(v, ',')) {
    try {
      out.push_back(parse(text::trim(item)));
    } catch (const Error& e) {
      fail(ErrorCode::ConfigError, key + ": " + e.what());
    }
  }
  return out;
}

template <typename Parse>
auto config_level(const std::string& key, std::string_view level, Parse parse) {
  try {
    return parse(level);
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, key + ": " + e.what());
  }
}

}  // namespace detail

/// Applies `key = value` from section `section`. Throws ConfigError on an
/// unknown key or a malformed value.
inline void apply_setting(PipelineConfig& c, const std::string& section, const std::string& key,
                          const std::string& value) {
  const std::string name = section + "." + key;
  auto num = [&] { return detail::config_double(name, value); };
  auto integer = [&] { return detail::config_int(name, value); };
  auto& g = c.gen;
  auto& cc = g.cohort;
  auto& sc = g.stream;

  auto dotted = [&](std::string_view prefix, std::string_view& level) {
    if (key.size() > prefix.size() + 1 && key.compare(0, prefix.size(), prefix) == 0 && key[prefix.size()] == '.') {
      level = std::string_view(key).substr(prefix.size() + 1);
      return true;
    }
    return false;
  };

  if (section == "paths") {
    if (key == "data_root") return void(c.data_root = std::string(text::trim(value)));
    if (key == "output_root") return void(c.output_root = std::string(text::trim(value)));
  } else if (section == "run") {
    if (key == "seed") {
      long long s = 0;
      if (!text::parse_int(text::trim(value), s) || s < 0) fail(ErrorCode::ConfigError, name + ": expected a seed >= 0");
      return void(c.seed = static_cast<std::uint64_t>(s));
    }
    if (key == "jobs") return void(c.jobs = integer());
  } else if (section == "gen") {
    std::string_view level;
    if (key == "units") return void(g.units = detail::config_list<WorkUnit>(name, value, parse_work_unit));
    if (key == "shifts") return void(g.shifts = detail::config_list<ShiftType>(name, value, parse_shift_type));
    if (key == "participants_per_cell") return void(g.participants_per_cell = integer());
    if (key == "shifts_per_participant") return void(cc.shifts_per_participant = integer());
    if (key == "noncompliant_fraction") return void(cc.noncompliant_fraction = num());
    if (key == "day_shift_hours") return void(cc.day_shift_hours = num());
    if (key == "night_shift_hours") return void(cc.night_shift_hours = num());
    if (key == "frames_per_recording") return void(cc.frames_per_recording = integer());
    if (key == "base_rate") return void(cc.base_rate = num());
    if (key == "day_night_rate_delta") return void(cc.day_night_rate_delta = num());
    if (key == "participant_rate_sd") return void(cc.participant_rate_sd = num());
    if (key == "base_duration_min") return void(cc.base_duration_min = num());
    if (key == "participant_duration_sd") return void(cc.participant_duration_sd = num());
    if (key == "idle_recordings_per_hour") return void(cc.idle_recordings_per_hour = num());
    if (key == "arousal_halflife_slope") return void(cc.arousal_halflife_slope = num());
    if (dotted("unit_duration_delta", level))
      return void(cc.unit_duration_deltas[detail::config_level(name, level, parse_work_unit)] = num());
    if (dotted("freq_irb_slope", level))
      return void(cc.freq_irb_slope[detail::config_level(name, level, parse_work_unit)] = num());
    if (dotted("freq_stai_slope", level))
      return void(cc.freq_stai_slope[detail::config_level(name, level, parse_shift_type)] = num());
  } else if (section == "stream") {
    if (key == "fg_rate") return void(sc.fg_rate = num());
    if (key == "bg_rate") return void(sc.bg_rate = num());
    if (key == "mean_segment_frames") return void(sc.mean_segment_frames = integer());
    if (key == "noise_sd") return void(sc.noise_sd = num());
    if (key == "offset_amplitude") return void(g.offset_amplitude = num());
    if (key == "teacher_accuracy") return void(sc.teacher_accuracy = num());
    if (key == "train_frames") return void(g.train_frames = integer());
    if (key == "heldout_frames") return void(g.heldout_frames = integer());
    if (key == "frames_per_recording") return void(g.corpus_frames_per_recording = integer());
  } else if (section == "train") {
    auto& t = c.train;
    if (key == "learning_rate") return void(t.learning_rate = num());
    if (key == "epochs") return void(t.epochs = integer());
    if (key == "alpha") return void(t.alpha = num());
    if (key == "window_frames") return void(t.window_frames = integer());
    if (key == "batch_size") return void(t.batch_size = integer());
    if (key == "residual_blocks") return void(t.model.residual_blocks = integer());
    if (key == "channels") return void(t.model.channels = integer());
    if (key == "kernel_width") return void(t.model.kernel_width = integer());
    if (key == "pretrain_epochs") return void(c.pretrain_epochs = integer());
    if (key == "pretrain_learning_rate") return void(c.pretrain_learning_rate = num());
  } else if (section == "behavior") {
    if (key == "min_fg_frames") return void(c.min_fg_frames = integer());
    if (key == "min_shifts") return void(c.min_shifts = integer());
  } else if (section == "arousal") {
    if (key == "min_model_size") return void(c.min_model_size = integer());
    if (key == "quantile") return void(c.quantile = num());
    if (key == "model_source") {
      const auto v = text::trim(value);
      if (v == "all_fg") return void(c.model_source = ModelSource::AllFgRecordings);
      if (v == "qualifying") return void(c.model_source = ModelSource::QualifyingOnly);
      fail(ErrorCode::ConfigError, name + ": expected all_fg or qualifying");
    }
  } else if (section == "stats") {
    if (key == "ss_type") {
      const auto v = text::trim(value);
      if (v == "II") return void(c.ss_type = stats::SsType::TypeII);
      if (v == "I") return void(c.ss_type = stats::SsType::TypeI);
      fail(ErrorCode::ConfigError, name + ": expected I or II");
    }
    if (key == "ci_level") return void(c.ci_level = num());
  } else {
    fail(ErrorCode::ConfigError, "unknown section [" + section + "]");
  }
  fail(ErrorCode::ConfigError, "unknown key " + name);
}

/// Range checks across the whole configuration.
inline void validate(const PipelineConfig& c) {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::ConfigError, what);
  };
  check(c.jobs >= 1, "run.jobs must be >= 1");
  check(!c.gen.units.empty() && !c.gen.shifts.empty(), "gen.units and gen.shifts must be nonempty");
  check(c.gen.participants_per_cell >= 0, "gen.participants_per_cell must be >= 0");
  check(c.gen.offset_amplitude > 0.0, "stream.offset_amplitude must be > 0");
  check(c.gen.train_frames >= 1 && c.gen.heldout_frames >= 1, "stream frame counts must be >= 1");
  check(c.gen.corpus_frames_per_recording >= 1 &&
            c.gen.corpus_frames_per_recording <= static_cast<int>(kMaxFramesPerRecording),
        "stream.frames_per_recording must be in [1, 2000]");
  check(c.pretrain_epochs >= 0 && c.pretrain_learning_rate > 0.0, "train.pretrain_* out of range");
  check(c.min_fg_frames >= 0 && c.min_shifts >= 1, "behavior thresholds out of range");
  check(c.min_model_size >= 1, "arousal.min_model_size must be >= 1");
  check(c.quantile >= 0.0 && c.quantile <= 1.0, "arousal.quantile must be in [0,1]");
  check(c.ci_level > 0.0 && c.ci_level < 1.0, "stats.ci_level must be in (0,1)");
  try {
    validate(c.train);
    synth::CohortConfig cc = c.gen.cohort;
    cc.min_fg_frames = std::max(c.min_fg_frames, 1);
    synth::validate(cc);
    synth::validate(c.gen.stream);
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, e.what());
  }
}

/// Parses INI text onto the defaults.
inline PipelineConfig parse_config(const std::string& ini_text) {
  PipelineConfig c;
  boost::property_tree::ptree tree;
  std::istringstream in(ini_text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorCode::ConfigError, e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) fail(ErrorCode::ConfigError, "key outside any section: " + section);
    for (const auto& [key, value] : body) apply_setting(c, section, key, value.data());
  }
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) fail(ErrorCode::ConfigError, "config file not found: " + path.string());
  return parse_config(text::read_file(path));
}

/// Canonical text of every setting that influences stage outputs (paths and
/// job count excluded). Its SHA-256 is the config hash in stage manifests.
inline std::string canonical_config(const PipelineConfig& c) {
  std::ostringstream o;
  auto d = [](double v) { return text::format_double(v); };
  const auto& g = c.gen;
  const auto& cc = g.cohort;
  const auto& sc = g.stream;
  o << "seed=" << c.seed << '\n';
  o << "gen.units=";
  for (auto u : g.units) o << to_string(u) << ',';
  o << "\ngen.shifts=";
  for (auto s : g.shifts) o << to_string(s) << ',';
  o << "\ngen.participants_per_cell=" << g.participants_per_cell << '\n'
    << "gen.shifts_per_participant=" << cc.shifts_per_participant << '\n'
    << "gen.noncompliant_fraction=" << d(cc.noncompliant_fraction) << '\n'
    << "gen.day_shift_hours=" << d(cc.day_shift_hours) << '\n'
    << "gen.night_shift_hours=" << d(cc.night_shift_hours) << '\n'
    << "gen.frames_per_recording=" << cc.frames_per_recording << '\n'
    << "gen.base_rate=" << d(cc.base_rate) << '\n'
    << "gen.day_night_rate_delta=" << d(cc.day_night_rate_delta) << '\n'
    << "gen.participant_rate_sd=" << d(cc.participant_rate_sd) << '\n'
    << "gen.base_duration_min=" << d(cc.base_duration_min) << '\n'
    << "gen.participant_duration_sd=" << d(cc.participant_duration_sd) << '\n'
    << "gen.idle_recordings_per_hour=" << d(cc.idle_recordings_per_hour) << '\n'
    << "gen.arousal_halflife_slope=" << d(cc.arousal_halflife_slope) << '\n';
  for (const auto& [u, v] : cc.unit_duration_deltas) o << "gen.unit_duration_delta." << to_string(u) << '=' << d(v) << '\n';
  for (const auto& [u, v] : cc.freq_irb_slope) o << "gen.freq_irb_slope." << to_string(u) << '=' << d(v) << '\n';
  for (const auto& [s, v] : cc.freq_stai_slope) o << "gen.freq_stai_slope." << to_string(s) << '=' << d(v) << '\n';
  o << "stream.fg_rate=" << d(sc.fg_rate) << '\n'
    << "stream.bg_rate=" << d(sc.bg_rate) << '\n'
    << "stream.mean_segment_frames=" << sc.mean_segment_frames << '\n'
    << "stream.noise_sd=" << d(sc.noise_sd) << '\n'
    << "stream.offset_amplitude=" << d(g.offset_amplitude) << '\n'
    << "stream.teacher_accuracy=" << d(sc.teacher_accuracy) << '\n'
    << "stream.train_frames=" << g.train_frames << '\n'
    << "stream.heldout_frames=" << g.heldout_frames << '\n'
    << "stream.frames_per_recording=" << g.corpus_frames_per_recording << '\n';
  const auto& t = c.train;
  o << "train.learning_rate=" << d(t.learning_rate) << '\n'
    << "train.epochs=" << t.epochs << '\n'
    << "train.alpha=" << d(t.alpha) << '\n'
    << "train.window_frames=" << t.window_frames << '\n'
    << "train.batch_size=" << t.batch_size << '\n'
    << "train.residual_blocks=" << t.model.residual_blocks << '\n'
    << "train.channels=" << t.model.channels << '\n'
    << "train.kernel_width=" << t.model.kernel_width << '\n'
    << "train.pretrain_epochs=" << c.pretrain_epochs << '\n'
    << "train.pretrain_learning_rate=" << d(c.pretrain_learning_rate) << '\n'
    << "behavior.min_fg_frames=" << c.min_fg_frames << '\n'
    << "behavior.min_shifts=" << c.min_shifts << '\n'
    << "arousal.min_model_size=" << c.min_model_size << '\n'
    << "arousal.quantile=" << d(c.quantile) << '\n'
    << "arousal.model_source=" << (c.model_source == ModelSource::AllFgRecordings ? "all_fg" : "qualifying") << '\n'
    << "stats.ss_type=" << (c.ss_type == stats::SsType::TypeII ? "II" : "I") << '\n'
    << "stats.ci_level=" << d(c.ci_level) << '\n';
  return o.str();
}

inline std::string config_hash(const PipelineConfig& c) { return sha256_hex(canonical_config(c)); }

/// The cohort generator settings implied by the pipeline config.
inline synth::CohortConfig cohort_config(const PipelineConfig& c) {
  synth::CohortConfig cc = c.gen.cohort;
  cc.cells.clear();
  for (auto u : c.gen.units)
    for (auto s : c.gen.shifts) cc.cells.push_back({u, s, c.gen.participants_per_cell});
  cc.min_fg_frames = std::max(c.min_fg_frames, 1);
  cc.acoustics = c.gen.stream;
  cc.acoustics.class_feature_offsets = synth::default_offsets(c.gen.offset_amplitude);
  cc.seed = synth::derive_seed(c.seed, 1);
  return cc;
}

inline synth::StreamConfig stream_config(const PipelineConfig& c) {
  synth::StreamConfig sc = c.gen.stream;
  sc.class_feature_offsets = synth::default_offsets(c.gen.offset_amplitude);
  return sc;
}

}  // namespace egocomm
