#pragma once

// Pipeline stages behind the command-line driver.
//
// Layout under the data root (written by `gen`, read by later stages):
//   cohort/{manifest.jsonl, surveys.csv, features/}
//   train/{manifest.jsonl, features/, teacher/}      labelled corpus + teacher
//   heldout/{manifest.jsonl, features/}              labelled scoring corpus
//   ground_truth.json
// Layout under the output root, one directory per stage:
//   gen/      stage_manifest.json only
//   train/    student.ckpt, history.csv
//   infer/    labels.csv
//   score/    der.csv, summary.json
//   segment/  sessions.csv, features.csv, compliance.csv
//   arousal/  arousal.csv, fusion.csv, recording_scores.csv, excluded.csv
//   analyze/  analysis.json, groups.csv, tests.csv, correlations.csv,
//             values.csv, correlation_points.csv
//   report/   table_*.csv, violin_*.csv, scatter_*.csv, scatter_fits.csv,
//             arousal_over_shift.csv
// Every stage writes <stage>/stage_manifest.json with the seed, the config
// hash and SHA-256 digests of its inputs and outputs (relative paths only).

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "egocomm/arousal.hpp"
#include "egocomm/behavior.hpp"
#include "egocomm/config.hpp"
#include "egocomm/diar_metrics.hpp"
#include "egocomm/distill.hpp"
#include "egocomm/error.hpp"
#include "egocomm/hash.hpp"
#include "egocomm/io.hpp"
#include "egocomm/parallel.hpp"
#include "egocomm/stats.hpp"
#include "egocomm/student_model.hpp"
#include "egocomm/synth.hpp"
#include "egocomm/text.hpp"

namespace egocomm::pipeline {

namespace fs = std::filesystem;

inline constexpr std::array<std::string_view, 8> kStages{"gen",     "train",   "infer",   "score",
                                                         "segment", "arousal", "analyze", "report"};
inline constexpr const char* kStageManifest = "stage_manifest.json";

// ---------------------------------------------------------------------------
// Manifests

struct FileRef {
  std::string root;  // "data" or "out"
  std::string path;  // relative to that root
};

class Stage {
 public:
  Stage(const PipelineConfig& config, std::string name) : config_(config), name_(std::move(name)) {
    dir_ = config_.output_root / name_;
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }
  fs::path data(const fs::path& rel) const { return config_.data_root / rel; }
  fs::path out(const fs::path& rel) const { return config_.output_root / rel; }

  void input(std::string root, std::string rel) { inputs_.push_back({std::move(root), std::move(rel)}); }
  void output_data(std::string rel) { data_outputs_.push_back(std::move(rel)); }

  void write(const std::string& file, std::string_view bytes) const { text::write_file(dir_ / file, bytes); }

  /// Hashes inputs and outputs and writes the manifest.
  void finish() const {
    auto entry = [&](const FileRef& f) {
      const auto base = f.root == "data" ? config_.data_root : config_.output_root;
      return nlohmann::ordered_json{{"root", f.root}, {"path", f.path}, {"sha256", sha256_tree(base / f.path)}};
    };
    nlohmann::ordered_json m;
    m["stage"] = name_;
    m["seed"] = config_.seed;
    m["config_hash"] = config_hash(config_);
    m["inputs"] = nlohmann::ordered_json::array();
    for (const auto& f : inputs_) m["inputs"].push_back(entry(f));
    m["outputs"] = nlohmann::ordered_json::array();
    for (const auto& rel : data_outputs_) m["outputs"].push_back(entry({"data", rel}));
    for (const auto& rel : list_files(dir_))
      if (rel != kStageManifest) m["outputs"].push_back(entry({"out", name_ + "/" + rel}));
    text::write_file(dir_ / kStageManifest, m.dump(2) + "\n");
  }

 private:
  const PipelineConfig& config_;
  std::string name_;
  fs::path dir_;
  std::vector<FileRef> inputs_;
  std::vector<std::string> data_outputs_;
};

inline void require_stage(const PipelineConfig& c, std::string_view stage) {
  if (!fs::is_regular_file(c.output_root / stage / kStageManifest))
    fail(ErrorCode::MissingPrerequisite, "stage '" + std::string(stage) + "' has not been run under " +
                                             c.output_root.string());
}

// ---------------------------------------------------------------------------
// CSV helpers

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    fail(ErrorCode::MalformedRow, "missing column " + std::string(name));
  }
};

inline CsvTable read_csv(const fs::path& path) {
  if (!fs::is_regular_file(path)) fail(ErrorCode::IoError, "missing file " + path.string());
  const auto bytes = text::read_file(path);
  CsvTable t;
  bool first = true;
  for (const auto& [lineno, line] : text::lines(bytes)) {
    std::vector<std::string> cols;
    for (auto c : text::split(line, ',')) cols.emplace_back(c);
    if (first) {
      t.header = std::move(cols);
      first = false;
      continue;
    }
    if (cols.size() != t.header.size())
      fail(ErrorCode::MalformedRow, path.filename().string() + " line " + std::to_string(lineno));
    t.rows.push_back(std::move(cols));
  }
  return t;
}

inline std::string csv_opt(const std::optional<double>& v) { return v ? text::format_double(*v) : std::string(); }

inline std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  if (!text::parse_double(s, v)) fail(ErrorCode::MalformedRow, "not a number: " + s);
  return v;
}

inline char label_char(FrameClass c) { return c == FrameClass::FG ? 'F' : c == FrameClass::BG ? 'B' : 'S'; }

inline std::string encode_labels(std::span<const FrameClass> labels) {
  std::string s(labels.size(), 'S');
  for (std::size_t i = 0; i < labels.size(); ++i) s[i] = label_char(labels[i]);
  return s;
}

inline std::vector<FrameClass> decode_labels(std::string_view s) {
  std::vector<FrameClass> out;
  out.reserve(s.size());
  for (char ch : s) {
    switch (ch) {
      case 'F': out.push_back(FrameClass::FG); break;
      case 'B': out.push_back(FrameClass::BG); break;
      case 'S': out.push_back(FrameClass::S); break;
      default: fail(ErrorCode::MalformedRow, std::string("bad label character '") + ch + "'");
    }
  }
  return out;
}

/// Inferred labels per corpus set ("cohort", "heldout").
inline std::map<std::string, LabelMap> read_labels(const fs::path& file) {
  const auto t = read_csv(file);
  const auto set = t.column("set"), id = t.column("recording_id"), lab = t.column("labels");
  std::map<std::string, LabelMap> out;
  for (const auto& r : t.rows) out[r[set]][r[id]] = decode_labels(r[lab]);
  return out;
}

// ---------------------------------------------------------------------------
// gen

inline nlohmann::ordered_json ground_truth_json(const synth::GroundTruth& g) {
  nlohmann::ordered_json j;
  j["day_night_rate_delta"] = g.day_night_rate_delta;
  j["arousal_halflife_slope"] = g.arousal_halflife_slope;
  auto by_level = [](const auto& m) {
    nlohmann::ordered_json o = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m) o[std::string(to_string(k))] = v;
    return o;
  };
  j["unit_duration_deltas"] = by_level(g.unit_duration_deltas);
  j["freq_irb_slope"] = by_level(g.freq_irb_slope);
  j["freq_stai_slope"] = by_level(g.freq_stai_slope);
  j["participants"] = nlohmann::ordered_json::array();
  for (const auto& p : g.participants)
    j["participants"].push_back({{"participant_id", p.participant_id},
                                 {"work_unit", to_string(p.unit)},
                                 {"primary_shift", to_string(p.shift)},
                                 {"sessions_per_hour", p.rate},
                                 {"session_duration_min", p.duration},
                                 {"rate_z", p.rate_z},
                                 {"n_shifts", p.n_shifts}});
  return j;
}

inline void run_gen(const PipelineConfig& c) {
  Stage stage(c, "gen");
  for (const char* sub : {"cohort", "train", "heldout", "ground_truth.json"}) fs::remove_all(c.data_root / sub);

  // Cohort: participants are generated and written independently, then the
  // manifest is assembled from frame-free copies in index order.
  const synth::CohortGenerator gen(cohort_config(c));
  std::vector<Participant> skeletons(gen.size());
  synth::GroundTruth truth = synth::planted(gen.config());
  truth.participants.resize(gen.size());
  const auto cohort_dir = c.data_root / "cohort";
  fs::create_directories(cohort_dir / "features");
  parallel_for(gen.size(), c.jobs, [&](std::size_t i) {
    Participant p = gen.participant(i, &truth.participants[i]);
    for (auto& s : p.shifts)
      for (auto& r : s.recordings) {
        text::write_file(cohort_dir / feature_path_for(r.recording_id), serialize_recording(r));
        r.frames.clear();
        r.labels.reset();
      }
    skeletons[i] = std::move(p);
  });
  Cohort skeleton;
  skeleton.participants = std::move(skeletons);
  text::write_file(cohort_dir / "surveys.csv", serialize_surveys(skeleton));
  text::write_file(cohort_dir / "manifest.jsonl", serialize_manifest(skeleton));
  text::write_file(c.data_root / "ground_truth.json", ground_truth_json(truth).dump(2) + "\n");

  const auto sc = stream_config(c);
  const auto per_rec = static_cast<std::size_t>(c.gen.corpus_frames_per_recording);
  const auto train = synth::gen_stream(sc, static_cast<std::size_t>(c.gen.train_frames), synth::derive_seed(c.seed, 2));
  write_corpus(synth::to_corpus(train, "train", per_rec), c.data_root / "train");
  auto heldout = synth::to_corpus(
      synth::gen_stream(sc, static_cast<std::size_t>(c.gen.heldout_frames), synth::derive_seed(c.seed, 3)), "heldout",
      per_rec);
  for (auto& item : heldout) item.teacher.reset();
  write_corpus(heldout, c.data_root / "heldout");

  for (const char* sub : {"cohort", "train", "heldout", "ground_truth.json"}) stage.output_data(sub);
  stage.finish();
}

// ---------------------------------------------------------------------------
// train

inline std::vector<CorpusItem> read_corpus(const fs::path& dir) {
  if (!fs::is_regular_file(dir / "manifest.jsonl"))
    fail(ErrorCode::MissingPrerequisite, "corpus manifest not found in " + dir.string());
  return parse_corpus_manifest(text::read_file(dir / "manifest.jsonl"), {dir, {}});
}

/// Supervised pretraining with cross-entropy only, then distillation with
/// the configured TrainConfig starting from the pretrained weights.
inline TrainResult train_student(std::span<const TrainingWindow> windows, const PipelineConfig& c,
                                 std::vector<std::pair<std::string, LossBreakdown>>* history = nullptr) {
  TrainConfig pre = c.train;
  pre.alpha = 0.0;
  pre.epochs = c.pretrain_epochs;
  pre.learning_rate = c.pretrain_learning_rate;
  pre.seed = synth::derive_seed(c.seed, 4);
  auto pretrained = train(windows, pre);
  TrainConfig distill = c.train;
  distill.seed = synth::derive_seed(c.seed, 5);
  auto result = train(windows, distill, std::move(pretrained.model));
  if (history) {
    for (const auto& l : pretrained.history) history->emplace_back("pretrain", l);
    for (const auto& l : result.history) history->emplace_back("distill", l);
  }
  return result;
}

inline void run_train(const PipelineConfig& c) {
  require_stage(c, "gen");
  Stage stage(c, "train");
  const auto items = read_corpus(c.data_root / "train");
  const auto windows = make_training_windows(items, c.train.window_frames, c.train.model.kernel_width);
  std::vector<std::pair<std::string, LossBreakdown>> history;
  const auto result = train_student(windows, c, &history);
  stage.write("student.ckpt", save_checkpoint(result.model));
  std::string h = "phase,epoch,ce,kld,total\n";
  std::map<std::string, int> epoch;
  for (const auto& [phase, l] : history)
    h += phase + ',' + std::to_string(epoch[phase]++) + ',' + text::format_double(l.ce) + ',' +
         text::format_double(l.kld) + ',' + text::format_double(l.total) + '\n';
  stage.write("history.csv", h);
  stage.input("data", "train");
  stage.finish();
}

// ---------------------------------------------------------------------------
// infer

inline Cohort read_cohort_checked(const PipelineConfig& c) {
  const auto dir = c.data_root / "cohort";
  if (!fs::is_regular_file(dir / "manifest.jsonl"))
    fail(ErrorCode::MissingPrerequisite, "cohort manifest not found in " + dir.string());
  return read_cohort(dir);
}

inline void run_infer(const PipelineConfig& c) {
  require_stage(c, "gen");
  require_stage(c, "train");
  Stage stage(c, "infer");
  const auto model = load_checkpoint(text::read_file(stage.out("train/student.ckpt")));
  const auto cohort = read_cohort_checked(c);
  const auto heldout = read_corpus(c.data_root / "heldout");

  std::vector<std::pair<std::string, const Recording*>> work;
  for (const auto& p : cohort.participants)
    for (const auto& s : p.shifts)
      for (const auto& r : s.recordings) work.emplace_back("cohort", &r);
  for (const auto& item : heldout) work.emplace_back("heldout", &item.recording);

  std::vector<std::string> encoded(work.size());
  parallel_for(work.size(), c.jobs, [&](std::size_t i) {
    encoded[i] = encode_labels(infer_labels(model, *work[i].second, c.train.window_frames));
  });
  std::string out = "set,recording_id,labels\n";
  for (std::size_t i = 0; i < work.size(); ++i)
    out += work[i].first + ',' + work[i].second->recording_id + ',' + encoded[i] + '\n';
  stage.write("labels.csv", out);
  stage.input("out", "train/student.ckpt");
  stage.input("data", "cohort");
  stage.input("data", "heldout");
  stage.finish();
}

// ---------------------------------------------------------------------------
// score

inline void run_score(const PipelineConfig& c) {
  require_stage(c, "infer");
  Stage stage(c, "score");
  const auto inferred = read_labels(stage.out("infer/labels.csv"));
  const auto cohort = read_cohort_checked(c);
  const auto heldout = read_corpus(c.data_root / "heldout");

  std::vector<std::pair<std::string, const Recording*>> refs;
  for (const auto& p : cohort.participants)
    for (const auto& s : p.shifts)
      for (const auto& r : s.recordings)
        if (r.labels) refs.emplace_back("cohort", &r);
  for (const auto& item : heldout)
    if (item.recording.labels) refs.emplace_back("heldout", &item.recording);

  std::string csv =
      "set,recording_id,total_frames,ref_speech_frames,miss_frames,false_alarm_frames,confusion_frames,miss,"
      "false_alarm,confusion,der\n";
  auto row = [&](const std::string& set, const std::string& id, const DiarizationScore& s) {
    csv += set + ',' + id + ',' + std::to_string(s.total_frames) + ',' + std::to_string(s.ref_speech_frames) + ',' +
           std::to_string(s.miss_frames) + ',' + std::to_string(s.false_alarm_frames) + ',' +
           std::to_string(s.confusion_frames) + ',' + text::format_double(s.miss) + ',' +
           text::format_double(s.false_alarm) + ',' + text::format_double(s.confusion) + ',' +
           text::format_double(s.der) + '\n';
  };
  std::map<std::string, std::vector<DiarizationScore>> by_set;
  std::map<std::string, std::size_t> skipped;
  for (const auto& [set, rec] : refs) {
    const auto& hyp_map = inferred.at(set);
    auto it = hyp_map.find(rec->recording_id);
    if (it == hyp_map.end()) fail(ErrorCode::MissingLabels, rec->recording_id);
    if (count_class(*rec->labels, FrameClass::S) == rec->labels->size()) {
      ++skipped[set];  // DER is undefined without reference speech
      continue;
    }
    const auto s = score(*rec->labels, it->second);
    row(set, rec->recording_id, s);
    by_set[set].push_back(s);
    by_set["all"].push_back(s);
  }
  if (by_set.empty()) fail(ErrorCode::EmptyDataset, "no recordings with reference labels to score");

  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  for (const auto& [set, scores] : by_set) {
    const auto micro = aggregate(scores);
    const auto macro = aggregate_macro(scores);
    row(set, "POOLED_MICRO", micro);
    row(set, "POOLED_MACRO", macro);
    summary[set] = {{"recordings", scores.size()},
                    {"skipped_no_reference_speech", skipped[set]},
                    {"der_micro", micro.der},
                    {"der_macro", macro.der},
                    {"miss", micro.miss},
                    {"false_alarm", micro.false_alarm},
                    {"confusion", micro.confusion}};
  }
  stage.write("der.csv", csv);
  stage.write("summary.json", summary.dump(2) + "\n");
  stage.input("out", "infer/labels.csv");
  stage.input("data", "cohort");
  stage.input("data", "heldout");
  stage.finish();
}

// ---------------------------------------------------------------------------
// segment

inline std::string demographics(const Participant& p) {
  return std::string(to_string(p.work_unit)) + ',' + std::string(to_string(p.primary_shift)) + ',' +
         std::string(to_string(p.sex)) + ',' + std::string(to_string(p.age_group));
}

inline void run_segment(const PipelineConfig& c) {
  require_stage(c, "infer");
  Stage stage(c, "segment");
  auto labels = read_labels(stage.out("infer/labels.csv"));
  const auto& cohort_labels = labels["cohort"];
  const auto cohort = read_cohort_checked(c);
  const auto compliant = filter_compliant(cohort, c.min_shifts);

  std::string compliance = "participant_id,recorded_shifts,included\n";
  std::set<std::string> included;
  for (const auto& p : compliant.participants) included.insert(p.participant_id);
  for (const auto& p : cohort.participants) {
    const auto recorded = std::count_if(p.shifts.begin(), p.shifts.end(), [](const Shift& s) { return !s.recordings.empty(); });
    compliance += p.participant_id + ',' + std::to_string(recorded) + ',' +
                  (included.count(p.participant_id) ? "1" : "0") + '\n';
  }

  std::string sessions = "participant_id,shift_id,session_index,first_minute,n_recordings,half\n";
  std::string features =
      "participant_id,shift_id,work_unit,primary_shift,sex,age_group,sessions_per_hour,avg_session_duration_min,"
      "n_sessions\n";
  auto feature_row = [&](const Participant& p, const std::string& shift_id, const BehaviorFeatures& f) {
    features += p.participant_id + ',' + shift_id + ',' + demographics(p) + ',' + text::format_double(f.sessions_per_hour) +
                ',' + csv_opt(f.avg_session_duration_min) + ',' + std::to_string(f.n_sessions) + '\n';
  };
  for (const auto& p : compliant.participants) {
    std::vector<BehaviorFeatures> per_shift;
    for (const auto& s : p.shifts) {
      const auto ss = shift_sessions(s, cohort_labels, c.min_fg_frames);
      for (std::size_t k = 0; k < ss.size(); ++k)
        sessions += p.participant_id + ',' + s.shift_id + ',' + std::to_string(k) + ',' +
                    std::to_string(ss[k].first_minute()) + ',' + std::to_string(ss[k].length()) + ',' +
                    std::string(to_string(half_of(s, ss[k]))) + '\n';
      per_shift.push_back(shift_features(s, ss));
      feature_row(p, s.shift_id, per_shift.back());
    }
    feature_row(p, "ALL", participant_features(per_shift));
  }
  stage.write("compliance.csv", compliance);
  stage.write("sessions.csv", sessions);
  stage.write("features.csv", features);
  stage.input("out", "infer/labels.csv");
  stage.input("data", "cohort");
  stage.finish();
}

// ---------------------------------------------------------------------------
// arousal

inline void run_arousal(const PipelineConfig& c) {
  require_stage(c, "infer");
  require_stage(c, "segment");
  Stage stage(c, "arousal");
  auto labels = read_labels(stage.out("infer/labels.csv"));
  const auto& cohort_labels = labels["cohort"];
  const auto cohort = filter_compliant(read_cohort_checked(c), c.min_shifts);
  ArousalOptions opt;
  opt.min_model_size = c.min_model_size;
  opt.quantile = c.quantile;
  opt.min_fg_frames = c.min_fg_frames;
  opt.model_source = c.model_source;

  const auto n = cohort.participants.size();
  std::vector<std::optional<ArousalProfile>> profiles(n);
  std::vector<std::string> reasons(n);
  parallel_for(n, c.jobs, [&](std::size_t i) {
    try {
      profiles[i] = participant_arousal(cohort.participants[i], cohort_labels, opt);
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::InsufficientData:
        case ErrorCode::TooFewObservations:
        case ErrorCode::NoData:
        case ErrorCode::DegenerateScores:
          reasons[i] = std::string(to_string(e.code()));
          break;
        default:
          throw;
      }
    }
  });

  std::string arousal = "participant_id,shift_id,shift_type,half,p90_arousal,n_recordings\n";
  std::string fusion = "participant_id,w1,w2,w3,r1,r2,r3,fallback\n";
  std::string scores = "participant_id,shift_id,shift_type,recording_id,minute_index,half,p_log_pitch,p_intensity,p_hf_lf_ratio,fused\n";
  std::string excluded = "participant_id,reason\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cohort.participants[i];
    if (!profiles[i]) {
      excluded += p.participant_id + ',' + reasons[i] + '\n';
      continue;
    }
    const auto& prof = *profiles[i];
    std::size_t all_first = 0, all_second = 0;
    for (const auto& sa : prof.shifts) {
      const auto type = std::string(to_string(sa.shift_type));
      arousal += p.participant_id + ',' + sa.shift_id + ',' + type + ",first," + csv_opt(sa.p90.first) + ',' +
                 std::to_string(sa.n_first) + '\n';
      arousal += p.participant_id + ',' + sa.shift_id + ',' + type + ",second," + csv_opt(sa.p90.second) + ',' +
                 std::to_string(sa.n_second) + '\n';
      all_first += sa.n_first;
      all_second += sa.n_second;
    }
    const auto ptype = std::string(to_string(p.primary_shift));
    arousal += p.participant_id + ",ALL," + ptype + ",first," + csv_opt(prof.participant.first) + ',' +
               std::to_string(all_first) + '\n';
    arousal += p.participant_id + ",ALL," + ptype + ",second," + csv_opt(prof.participant.second) + ',' +
               std::to_string(all_second) + '\n';
    fusion += p.participant_id;
    for (double w : prof.fusion.weights) fusion += ',' + text::format_double(w);
    for (double r : prof.fusion.correlations) fusion += ',' + text::format_double(r);
    fusion += std::string(",") + (prof.fusion.fallback ? "1" : "0") + '\n';

    std::map<std::string, const Shift*> shift_by_id;
    for (const auto& s : p.shifts) shift_by_id[s.shift_id] = &s;
    for (std::size_t j = 0; j < prof.scored.size(); ++j) {
      const Shift& s = *shift_by_id.at(prof.scored_shift_ids[j]);
      const auto& sr = prof.scored[j];
      scores += p.participant_id + ',' + s.shift_id + ',' + std::string(to_string(s.shift_type)) + ',' + sr.recording_id +
                ',' + std::to_string(sr.minute_index) + ',' + std::string(to_string(half_of(s, sr.minute_index)));
      for (std::size_t k = 0; k < kNumArousalFeatures; ++k)
        scores += ',' + text::format_double(prof.per_feature_scores[k][j]);
      scores += ',' + text::format_double(sr.fused) + '\n';
    }
  }
  stage.write("arousal.csv", arousal);
  stage.write("fusion.csv", fusion);
  stage.write("recording_scores.csv", scores);
  stage.write("excluded.csv", excluded);
  stage.input("out", "infer/labels.csv");
  stage.input("out", "segment/compliance.csv");
  stage.input("data", "cohort");
  stage.finish();
}

// ---------------------------------------------------------------------------
// analyze

struct ParticipantRow {
  std::string id, unit, shift, sex, age;
  std::optional<double> frequency, duration, arousal_first, arousal_second, stai, irb;

  std::optional<double> response(std::string_view name) const {
    if (name == "frequency") return frequency;
    if (name == "duration") return duration;
    if (name == "arousal_first") return arousal_first;
    if (name == "arousal_second") return arousal_second;
    if (name == "stai") return stai;
    if (name == "irb") return irb;
    fail(ErrorCode::ConfigError, "unknown response " + std::string(name));
  }
};

inline constexpr std::array<std::string_view, 4> kResponses{"frequency", "duration", "arousal_first", "arousal_second"};

inline std::vector<ParticipantRow> participant_table(const PipelineConfig& c) {
  const auto feats = read_csv(c.output_root / "segment/features.csv");
  std::map<std::string, ParticipantRow> rows;
  const auto pid = feats.column("participant_id"), sid = feats.column("shift_id");
  for (const auto& r : feats.rows) {
    if (r[sid] != "ALL") continue;
    ParticipantRow row;
    row.id = r[pid];
    row.unit = r[feats.column("work_unit")];
    row.shift = r[feats.column("primary_shift")];
    row.sex = r[feats.column("sex")];
    row.age = r[feats.column("age_group")];
    row.frequency = parse_opt(r[feats.column("sessions_per_hour")]);
    row.duration = parse_opt(r[feats.column("avg_session_duration_min")]);
    rows[row.id] = row;
  }
  const auto ar = read_csv(c.output_root / "arousal/arousal.csv");
  for (const auto& r : ar.rows) {
    if (r[ar.column("shift_id")] != "ALL") continue;
    auto it = rows.find(r[ar.column("participant_id")]);
    if (it == rows.end()) continue;
    (r[ar.column("half")] == "first" ? it->second.arousal_first : it->second.arousal_second) =
        parse_opt(r[ar.column("p90_arousal")]);
  }
  const auto surveys_path = c.data_root / "cohort/surveys.csv";
  if (fs::is_regular_file(surveys_path))
    for (const auto& [id, s] : parse_surveys(text::read_file(surveys_path))) {
      auto it = rows.find(id);
      if (it == rows.end()) continue;
      if (s.stai_total) it->second.stai = *s.stai_total;
      if (s.irb_total) it->second.irb = *s.irb_total;
    }
  std::vector<ParticipantRow> out;
  for (auto& [id, r] : rows) out.push_back(std::move(r));
  return out;
}

inline nlohmann::ordered_json json_number(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(text::format_double(v));
}

inline void run_analyze(const PipelineConfig& c) {
  require_stage(c, "segment");
  require_stage(c, "arousal");
  Stage stage(c, "analyze");
  const auto table = participant_table(c);

  nlohmann::ordered_json report;
  report["analyses"] = nlohmann::ordered_json::array();
  report["correlations"] = nlohmann::ordered_json::array();
  std::string groups_csv = "analysis,response,level,mean,ci_lo,ci_hi,n\n";
  std::string tests_csv = "analysis,response,factor,F,p,df_num,df_den\n";
  std::string values_csv = "analysis,response,level,participant_id,value\n";
  std::string corr_csv = "name,subgroup,n,r,p,error\n";
  std::string points_csv = "name,subgroup,participant_id,x,y\n";

  struct Analysis {
    std::string name, factor;
    std::function<bool(const ParticipantRow&)> keep;
    std::function<std::string(const ParticipantRow&)> level;
  };
  const std::vector<Analysis> analyses{
      {"shift", "shift", [](const ParticipantRow&) { return true; }, [](const ParticipantRow& r) { return r.shift; }},
      {"unit", "unit", [](const ParticipantRow& r) { return r.shift == "day"; },
       [](const ParticipantRow& r) { return r.unit; }},
  };

  for (const auto& a : analyses)
    for (auto response : kResponses) {
      std::vector<double> y;
      std::vector<std::string> factor, sex, age;
      std::map<std::string, std::vector<double>> by_level;
      for (const auto& r : table) {
        if (!a.keep(r)) continue;
        const auto v = r.response(response);
        if (!v) continue;
        y.push_back(*v);
        factor.push_back(a.level(r));
        sex.push_back(r.sex);
        age.push_back(r.age);
        by_level[a.level(r)].push_back(*v);
        values_csv += a.name + ',' + std::string(response) + ',' + a.level(r) + ',' + r.id + ',' + text::format_double(*v) + '\n';
      }
      nlohmann::ordered_json entry{{"name", a.name}, {"response", response}, {"factor", a.factor}};
      entry["groups"] = nlohmann::ordered_json::array();
      for (const auto& [level, vals] : by_level) {
        nlohmann::ordered_json g{{"level", level}, {"n", vals.size()}, {"mean", stats::mean(vals)}};
        std::string lo, hi;
        if (vals.size() >= 2) {
          const auto ci = stats::mean_ci(vals, c.ci_level);
          g["ci_lo"] = ci.lo;
          g["ci_hi"] = ci.hi;
          lo = text::format_double(ci.lo);
          hi = text::format_double(ci.hi);
        } else {
          g["ci_lo"] = nullptr;
          g["ci_hi"] = nullptr;
        }
        entry["groups"].push_back(g);
        groups_csv += a.name + ',' + std::string(response) + ',' + level + ',' + text::format_double(stats::mean(vals)) + ',' +
                      lo + ',' + hi + ',' + std::to_string(vals.size()) + '\n';
      }
      entry["tests"] = nlohmann::ordered_json::array();
      entry["error"] = nullptr;
      try {
        const auto res = stats::three_way_anova(y, factor, sex, age, c.ss_type);
        for (const auto& t : res.tests) {
          const auto name = t.factor == "factor" ? a.factor : t.factor;
          entry["tests"].push_back({{"factor", name},
                                    {"F", json_number(t.F)},
                                    {"p", t.p},
                                    {"df_num", t.df_num},
                                    {"df_den", t.df_den}});
          tests_csv += a.name + ',' + std::string(response) + ',' + name + ',' + text::format_double(t.F) + ',' +
                       text::format_double(t.p) + ',' + std::to_string(t.df_num) + ',' + std::to_string(t.df_den) + '\n';
        }
      } catch (const Error& e) {
        entry["error"] = e.what();
        tests_csv += a.name + ',' + std::string(response) + ',' + a.factor + ",,,,\n";
      }
      report["analyses"].push_back(entry);
    }

  struct Correlation {
    std::string name, x, y, subgroup;
    std::function<bool(const ParticipantRow&)> keep;
  };
  std::vector<Correlation> correlations;
  std::set<std::string> units;
  for (const auto& r : table) units.insert(r.unit);
  for (const auto& u : units)
    for (const char* s : {"day", "night"})
      correlations.push_back({"frequency_vs_irb", "frequency", "irb", u + "_" + s,
                              [u, s = std::string(s)](const ParticipantRow& r) { return r.unit == u && r.shift == s; }});
  for (const char* s : {"day", "night"})
    correlations.push_back({"frequency_vs_stai", "frequency", "stai", s,
                            [s = std::string(s)](const ParticipantRow& r) { return r.shift == s; }});
  for (const char* u : {"ICU", "nonICU"})
    for (const char* s : {"day", "night"})
      for (const char* half : {"arousal_first", "arousal_second"})
        correlations.push_back({std::string(half) + "_vs_stai", half, "stai", std::string(u) + "_" + s,
                                [u = std::string(u), s = std::string(s)](const ParticipantRow& r) {
                                  return r.unit == u && r.shift == s;
                                }});

  for (const auto& cr : correlations) {
    std::vector<double> xs, ys;
    for (const auto& r : table) {
      if (!cr.keep(r)) continue;
      const auto x = r.response(cr.x), y = r.response(cr.y);
      if (!x || !y) continue;
      xs.push_back(*x);
      ys.push_back(*y);
      points_csv += cr.name + ',' + cr.subgroup + ',' + r.id + ',' + text::format_double(*x) + ',' +
                    text::format_double(*y) + '\n';
    }
    if (xs.empty()) continue;
    nlohmann::ordered_json entry{{"name", cr.name}, {"x", cr.x}, {"y", cr.y}, {"subgroup", cr.subgroup}, {"n", xs.size()}};
    try {
      const auto res = stats::pearson(xs, ys);
      entry["r"] = res.r;
      entry["p"] = res.p;
      entry["error"] = nullptr;
      corr_csv += cr.name + ',' + cr.subgroup + ',' + std::to_string(xs.size()) + ',' + text::format_double(res.r) +
                  ',' + text::format_double(res.p) + ",\n";
    } catch (const Error& e) {
      entry["r"] = nullptr;
      entry["p"] = nullptr;
      entry["error"] = std::string(to_string(e.code()));
      corr_csv += cr.name + ',' + cr.subgroup + ',' + std::to_string(xs.size()) + ",,," +
                  std::string(to_string(e.code())) + '\n';
    }
    report["correlations"].push_back(entry);
  }

  std::string participants_csv = "participant_id,work_unit,primary_shift,sex,age_group,frequency,duration,arousal_first,arousal_second,stai,irb\n";
  for (const auto& r : table)
    participants_csv += r.id + ',' + r.unit + ',' + r.shift + ',' + r.sex + ',' + r.age + ',' + csv_opt(r.frequency) +
                        ',' + csv_opt(r.duration) + ',' + csv_opt(r.arousal_first) + ',' + csv_opt(r.arousal_second) +
                        ',' + csv_opt(r.stai) + ',' + csv_opt(r.irb) + '\n';

  stage.write("analysis.json", report.dump(2) + "\n");
  stage.write("groups.csv", groups_csv);
  stage.write("tests.csv", tests_csv);
  stage.write("values.csv", values_csv);
  stage.write("correlations.csv", corr_csv);
  stage.write("correlation_points.csv", points_csv);
  stage.write("participants.csv", participants_csv);
  stage.input("out", "segment/features.csv");
  stage.input("out", "arousal/arousal.csv");
  stage.input("data", "cohort/surveys.csv");
  stage.finish();
}

// ---------------------------------------------------------------------------
// report

inline std::string optional_json_number(const nlohmann::json& v) {
  if (v.is_null()) return {};
  if (v.is_string()) return v.get<std::string>();
  return text::format_double(v.get<double>());
}

/// Ordinary least squares y = intercept + slope * x.
inline std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y) {
  const double mx = stats::mean(x), my = stats::mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {my - slope * mx, slope};
}

inline void run_report(const PipelineConfig& c) {
  require_stage(c, "analyze");
  require_stage(c, "arousal");
  Stage stage(c, "report");
  const auto analysis = nlohmann::json::parse(text::read_file(stage.out("analyze/analysis.json")));

  // One row per level, then one row for the factor test.
  for (const auto& a : analysis.at("analyses")) {
    const auto name = a.at("name").get<std::string>(), response = a.at("response").get<std::string>();
    const auto factor = a.at("factor").get<std::string>();
    std::string t = "row,level,mean,ci_lo,ci_hi,n,F,p\n";
    for (const auto& g : a.at("groups"))
      t += "level," + g.at("level").get<std::string>() + ',' + optional_json_number(g.at("mean")) + ',' +
           optional_json_number(g.at("ci_lo")) + ',' + optional_json_number(g.at("ci_hi")) + ',' +
           std::to_string(g.at("n").get<std::size_t>()) + ",,\n";
    std::string F, p;
    for (const auto& test : a.at("tests"))
      if (test.at("factor") == factor) {
        F = optional_json_number(test.at("F"));
        p = optional_json_number(test.at("p"));
      }
    t += "test," + factor + ",,,,," + F + ',' + p + '\n';
    stage.write("table_" + name + "_" + response + ".csv", t);
  }

  const auto values = read_csv(stage.out("analyze/values.csv"));
  std::map<std::string, std::string> violins;
  for (const auto& r : values.rows) {
    auto& v = violins["violin_" + r[values.column("analysis")] + "_" + r[values.column("response")] + ".csv"];
    if (v.empty()) v = "level,participant_id,value\n";
    v += r[values.column("level")] + ',' + r[values.column("participant_id")] + ',' + r[values.column("value")] + '\n';
  }
  for (const auto& [file, body] : violins) stage.write(file, body);

  const auto points = read_csv(stage.out("analyze/correlation_points.csv"));
  std::map<std::string, std::vector<std::array<std::string, 3>>> scatter;
  for (const auto& r : points.rows)
    scatter[r[points.column("name")] + "_" + r[points.column("subgroup")]].push_back(
        {r[points.column("participant_id")], r[points.column("x")], r[points.column("y")]});
  std::string fits = "scatter,n,intercept,slope\n";
  for (const auto& [key, rows] : scatter) {
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
      xs.push_back(*parse_opt(r[1]));
      ys.push_back(*parse_opt(r[2]));
    }
    const auto [b0, b1] = fit_line(xs, ys);
    std::string body = "participant_id,x,y,y_fit\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
      body += rows[i][0] + ',' + rows[i][1] + ',' + rows[i][2] + ',' + text::format_double(b0 + b1 * xs[i]) + '\n';
    stage.write("scatter_" + key + ".csv", body);
    fits += key + ',' + std::to_string(rows.size()) + ',' + text::format_double(b0) + ',' + text::format_double(b1) + '\n';
  }
  stage.write("scatter_fits.csv", fits);

  // Mean fused arousal per hour since shift start.
  const auto scores = read_csv(stage.out("arousal/recording_scores.csv"));
  std::map<std::pair<std::string, long long>, std::pair<double, std::size_t>> bins;
  for (const auto& r : scores.rows) {
    long long minute = 0;
    if (!text::parse_int(r[scores.column("minute_index")], minute)) fail(ErrorCode::MalformedRow, "minute_index");
    auto& b = bins[{r[scores.column("shift_type")], minute / 60}];
    b.first += *parse_opt(r[scores.column("fused")]);
    ++b.second;
  }
  std::string line = "shift_type,hour,mean_fused,n\n";
  for (const auto& [key, b] : bins)
    line += key.first + ',' + std::to_string(key.second) + ',' + text::format_double(b.first / static_cast<double>(b.second)) +
            ',' + std::to_string(b.second) + '\n';
  stage.write("arousal_over_shift.csv", line);

  stage.input("out", "analyze");
  stage.input("out", "arousal/recording_scores.csv");
  stage.finish();
}

// ---------------------------------------------------------------------------

inline void run_stage(std::string_view name, const PipelineConfig& c) {
  validate(c);
  if (name == "gen") return run_gen(c);
  if (name == "train") return run_train(c);
  if (name == "infer") return run_infer(c);
  if (name == "score") return run_score(c);
  if (name == "segment") return run_segment(c);
  if (name == "arousal") return run_arousal(c);
  if (name == "analyze") return run_analyze(c);
  if (name == "report") return run_report(c);
  fail(ErrorCode::ConfigError, "unknown stage " + std::string(name));
}

}  // namespace egocomm::pipeline
