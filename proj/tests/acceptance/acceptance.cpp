// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria.

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "egocomm/arousal.hpp"
#include "egocomm/behavior.hpp"
#include "egocomm/config.hpp"
#include "egocomm/diar_metrics.hpp"
#include "egocomm/distill.hpp"
#include "egocomm/hash.hpp"
#include "egocomm/pipeline.hpp"
#include "egocomm/special.hpp"
#include "egocomm/stats.hpp"
#include "egocomm/synth.hpp"

using namespace egocomm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_s) {
    out.ok = false;
    out.detail += fmt(" [over budget %.3gs]", budget_s);
  }
  std::printf("%s %2d %s: %s (%.3fs)\n", out.ok ? "PASS" : "FAIL", id, name, out.detail.c_str(), secs);
  std::fflush(stdout);
  failures += !out.ok;
}

std::vector<FrameClass> random_labels(std::mt19937_64& rng, std::size_t n) {
  std::vector<FrameClass> l(n);
  for (auto& c : l) c = static_cast<FrameClass>(std::uniform_int_distribution<int>(0, 2)(rng));
  return l;
}

// Ranks by counting: 1 + #smaller + (#equal - 1)/2.
std::vector<double> counting_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) less += w < v[i], equal += w == v[i];
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

Recording recording_with_fg(const std::string& id, std::int64_t minute, std::size_t fg, std::size_t n) {
  Recording r;
  r.recording_id = id;
  r.minute_index = minute;
  r.frames.resize(n);
  std::vector<FrameClass> labels(n, FrameClass::S);
  for (std::size_t t = 0; t < n; ++t) r.frames[t].frame_index = static_cast<std::int64_t>(t);
  std::fill_n(labels.begin(), fg, FrameClass::FG);
  r.labels = labels;
  return r;
}

// Participant-level mean speaking frequency from generator labels.
double participant_frequency(const Participant& p, int min_fg) {
  std::vector<BehaviorFeatures> per_shift;
  for (const auto& s : p.shifts) {
    const auto sessions = shift_sessions(s, {}, min_fg);
    per_shift.push_back(shift_features(s, sessions));
  }
  return participant_features(per_shift).sessions_per_hour;
}

struct CohortTable {
  std::vector<double> frequency, irb;
  std::vector<std::string> shift, sex, age;
};

CohortTable tabulate(const synth::CohortConfig& cfg) {
  synth::CohortGenerator gen(cfg);
  CohortTable t;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    const auto p = gen.participant(i);
    t.frequency.push_back(participant_frequency(p, cfg.min_fg_frames));
    t.irb.push_back(static_cast<double>(p.surveys.irb_total.value()));
    t.shift.emplace_back(to_string(p.primary_shift));
    t.sex.emplace_back(to_string(p.sex));
    t.age.emplace_back(to_string(p.age_group));
  }
  return t;
}

}  // namespace

int main() {
  criterion(1, "session segmentation example", 1e-3, [] {
    Shift shift;
    shift.shift_id = "s";
    shift.duration_hours = 1.0;
    for (std::int64_t m : {0, 1, 4}) shift.recordings.push_back(recording_with_fg("m" + std::to_string(m), m, 200, 300));
    const auto sessions = shift_sessions(shift, {}, 200);
    const bool ok = sessions.size() == 2 && sessions[0].minute_indices == std::vector<std::int64_t>{0, 1} &&
                    sessions[1].minute_indices == std::vector<std::int64_t>{4};
    return Outcome{ok, fmt("%zu sessions", sessions.size())};
  });

  criterion(2, "percentile score vs counting oracle", 1.0, [] {
    std::mt19937_64 rng(2);
    double worst = 0.0;
    int ties = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = std::uniform_int_distribution<int>(1, 60)(rng);
      std::vector<std::optional<double>> medians;
      std::vector<double> raw;
      for (int i = 0; i < n; ++i) raw.push_back(std::uniform_int_distribution<int>(0, 20)(rng) * 0.25);
      medians.assign(raw.begin(), raw.end());
      const auto model = build_empirical_model(medians, FeatureKind::Intensity, 1);
      const double x = trial % 2 ? raw[std::uniform_int_distribution<int>(0, n - 1)(rng)]
                                 : std::uniform_int_distribution<int>(-2, 22)(rng) * 0.25;
      double credit = 0.0;
      for (double s : raw) {
        credit += s < x ? 1.0 : (s == x ? 0.5 : 0.0);
        ties += s == x;
      }
      const double oracle = 2.0 * credit / n - 1.0;
      worst = std::max(worst, std::abs(score_recording(x, model) - oracle));
    }
    return Outcome{worst <= 1e-12, fmt("max |diff| %.3g over 1000 pairs, %d tied samples", worst, ties)};
  });

  criterion(3, "fusion weights and Spearman", 1.0, [] {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst_norm = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int n = std::uniform_int_distribution<int>(5, 40)(rng);
      std::array<std::vector<double>, 3> s;
      for (auto& v : s)
        for (int j = 0; j < n; ++j) v.push_back(u(rng));
      const auto f = fuse(s, false);
      const double norm = std::hypot(f.weights[0], f.weights[1], f.weights[2]);
      worst_norm = std::max(worst_norm, std::abs(norm - 1.0));
    }
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> a(25), b(25);
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = std::uniform_int_distribution<int>(0, 5)(rng);
        b[i] = a[i] + std::uniform_int_distribution<int>(-2, 2)(rng);
      }
      if (stats::is_constant(a) || stats::is_constant(b)) continue;
      mismatches += stats::spearman(a, b) != stats::pearson_r(counting_ranks(a), counting_ranks(b));
    }
    return Outcome{worst_norm <= 1e-9 && mismatches == 0,
                   fmt("max | |w| - 1 | %.3g; %d Spearman mismatches on tied inputs", worst_norm, mismatches)};
  });

  criterion(4, "DER identity and confusion-matrix oracle", 5.0, [] {
    std::mt19937_64 rng(4);
    int bad = 0;
    for (int trial = 0; trial < 500; ++trial) {
      const auto T = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 10000)(rng));
      auto ref = random_labels(rng, T);
      const auto hyp = random_labels(rng, T);
      ref[0] = FrameClass::FG;  // at least one reference speech frame
      std::size_t C[3][3] = {};
      for (std::size_t t = 0; t < T; ++t) ++C[static_cast<int>(ref[t])][static_cast<int>(hyp[t])];
      const std::size_t miss = C[0][2] + C[1][2], fa = C[2][0] + C[2][1], conf = C[0][1] + C[1][0];
      const std::size_t speech = C[0][0] + C[0][1] + C[0][2] + C[1][0] + C[1][1] + C[1][2];
      const auto s = score(ref, hyp);
      const double d = static_cast<double>(speech);
      bad += s.der != s.miss + s.false_alarm + s.confusion || s.miss_frames != miss || s.false_alarm_frames != fa ||
             s.confusion_frames != conf || s.ref_speech_frames != speech || s.miss != miss / d ||
             s.false_alarm != fa / d || s.confusion != conf / d;
    }
    return Outcome{bad == 0, fmt("%d of 500 pairs disagree", bad)};
  });

  criterion(5, "loss gradient vs central differences", 30.0, [] {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int m = 0; m < 3; ++m) {
      const ModelConfig mc{1 + m % 2, 4 + m, m == 1 ? 5 : 3};
      StudentModel model(mc);
      model.initialize(100 + m);
      const std::size_t T = 24;
      Matrix x(T, kNumMfcc), teacher(T, kNumClasses);
      for (double& v : x.data) v = nd(rng);
      for (std::size_t t = 0; t < T; ++t) {
        double sum = 0;
        for (std::size_t c = 0; c < kNumClasses; ++c) sum += (teacher(t, c) = std::exp(nd(rng)));
        for (std::size_t c = 0; c < kNumClasses; ++c) teacher(t, c) /= sum;
      }
      const auto labels = random_labels(rng, T);
      const double alpha = 5.0;
      const auto grad = backward(model, x, teacher, labels, alpha);
      auto loss_at = [&](const StudentModel& mm) { return distill_loss(forward(mm, x), teacher, labels, alpha).total; };
      const double eps = 1e-4;
      for (int k = 0; k < 20; ++k) {
        const auto j = std::uniform_int_distribution<std::size_t>(0, grad.size() - 1)(rng);
        StudentModel plus = model, minus = model;
        plus.parameters()[j] += eps;
        minus.parameters()[j] -= eps;
        const double fd = (loss_at(plus) - loss_at(minus)) / (2 * eps);
        const double scale = std::max({std::abs(fd), std::abs(grad[j]), 1e-8});
        worst = std::max(worst, std::abs(fd - grad[j]) / scale);
      }
    }
    return Outcome{worst <= 1e-4, fmt("max relative error %.3g over 60 parameters", worst)};
  });

  criterion(6, "distillation improves held-out DER", 300.0, [] {
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      synth::StreamConfig sc;  // teacher_accuracy 0.95
      const auto train_items = synth::to_corpus(synth::gen_stream(sc, 40000, seed), "tr", 1000);
      const auto test_items = synth::to_corpus(synth::gen_stream(sc, 20000, seed + 1000), "te", 1000);
      const auto windows = make_training_windows(train_items, 1000, 5);
      TrainConfig tc;
      tc.model.channels = 16;
      tc.model.residual_blocks = 2;
      tc.learning_rate = 1e-3;
      tc.epochs = 5;
      tc.seed = seed;
      double der[2];
      for (int k = 0; k < 2; ++k) {
        tc.alpha = k == 0 ? 0.0 : 5.0;
        const auto model = train(windows, tc).model;
        std::vector<DiarizationScore> scores;
        for (const auto& it : test_items) scores.push_back(score(*it.recording.labels, infer_labels(model, it.recording)));
        der[k] = aggregate(scores).der;
      }
      wins += der[1] <= der[0];
      detail += fmt("seed %d: %.4f -> %.4f; ", static_cast<int>(seed), der[0], der[1]);
    }
    return Outcome{wins >= 2, detail + fmt("%d/3 seeds", wins)};
  });

  criterion(7, "ANOVA oracle and null calibration", 120.0, [] {
    // Two groups of five: means 3 and 5, within SS 10 each, so F = 10 / (20 / 8) = 4.
    const std::vector<double> y{1, 2, 3, 4, 5, 3, 4, 5, 6, 7};
    const std::vector<std::string> g{"a", "a", "a", "a", "a", "b", "b", "b", "b", "b"};
    const auto res = stats::three_way_anova(y, g, std::vector<std::string>(10, "female"),
                                            std::vector<std::string>(10, "under40"));
    const double F = res.test("factor").F;
    const bool oracle_ok = std::abs(F - 4.0) <= 1e-9;

    int rejections = 0, ran = 0;
    for (int r = 0; r < 200; ++r) {
      synth::CohortConfig cfg;
      cfg.cells = {{WorkUnit::ICU, ShiftType::Day, 15}, {WorkUnit::ICU, ShiftType::Night, 15}};
      cfg.day_shift_hours = cfg.night_shift_hours = 2.0;
      cfg.frames_per_recording = 20;
      cfg.min_fg_frames = 10;
      cfg.seed = synth::derive_seed(7000, static_cast<std::uint64_t>(r));
      const auto t = tabulate(cfg);
      try {
        rejections += stats::three_way_anova(t.frequency, t.shift, t.sex, t.age).test("factor").p < 0.05;
        ++ran;
      } catch (const Error&) {
      }
    }
    const double rate = static_cast<double>(rejections) / ran;
    return Outcome{oracle_ok && ran == 200 && rate >= 0.02 && rate <= 0.08,
                   fmt("F = %.12g (expect 4); null rejection %d/%d = %.3f", F, rejections, ran, rate)};
  });

  criterion(8, "regularized incomplete beta", 10.0, [] {
    double worst_id = 0.0;
    for (double x = 0.0; x <= 1.0; x += 0.05) worst_id = std::max(worst_id, std::abs(special::reg_incomplete_beta(1, 1, x) - x));
    for (double a : {0.3, 1.0, 4.0, 17.0, 60.0})
      worst_id = std::max(worst_id, std::abs(special::reg_incomplete_beta(a, a, 0.5) - 0.5));
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> ua(0.5, 20.0), ux(0.01, 0.99);
    boost::math::quadrature::tanh_sinh<double> quad;
    double worst_sym = 0.0, worst_quad = 0.0;
    for (int k = 0; k < 50; ++k) {
      const double a = ua(rng), b = ua(rng), x = ux(rng);
      worst_sym = std::max(worst_sym, std::abs(special::reg_incomplete_beta(a, b, x) +
                                               special::reg_incomplete_beta(b, a, 1.0 - x) - 1.0));
      auto f = [&](double t) { return std::pow(t, a - 1.0) * std::pow(1.0 - t, b - 1.0); };
      const double oracle = quad.integrate(f, 0.0, x) / quad.integrate(f, 0.0, 1.0);
      worst_quad = std::max(worst_quad, std::abs(special::reg_incomplete_beta(a, b, x) - oracle));
    }
    return Outcome{worst_id <= 1e-10 && worst_sym <= 1e-10 && worst_quad <= 1e-9,
                   fmt("identities %.3g, symmetry %.3g, quadrature %.3g", worst_id, worst_sym, worst_quad)};
  });

  criterion(9, "planted effects recovered", 180.0, [] {
    synth::CohortConfig cfg;
    cfg.cells = {{WorkUnit::ICU, ShiftType::Day, 1000}, {WorkUnit::ICU, ShiftType::Night, 1000}};
    cfg.day_shift_hours = cfg.night_shift_hours = 2.0;
    cfg.frames_per_recording = 20;
    cfg.min_fg_frames = 10;
    cfg.day_night_rate_delta = 0.35;
    cfg.seed = 9;
    const auto t = tabulate(cfg);
    std::vector<double> day, night;
    for (std::size_t i = 0; i < t.frequency.size(); ++i) (t.shift[i] == "day" ? day : night).push_back(t.frequency[i]);
    const double delta = stats::mean(day) - stats::mean(night);
    const double p_shift = stats::three_way_anova(t.frequency, t.shift, t.sex, t.age).test("factor").p;
    const bool delta_ok = std::abs(delta - 0.35) <= 0.035 && p_shift < 0.01;

    synth::CohortConfig small;
    small.cells = {{WorkUnit::ICU, ShiftType::Day, 25}};
    small.day_shift_hours = 12.0;
    small.frames_per_recording = 20;
    small.min_fg_frames = 10;
    small.freq_irb_slope[WorkUnit::ICU] = -0.6;
    small.seed = 9;
    const auto s = tabulate(small);
    const auto corr = stats::pearson(s.frequency, s.irb);
    const bool corr_ok = corr.r < 0.0 && corr.p < 0.05;
    return Outcome{delta_ok && corr_ok, fmt("delta %.4f (n=%zu/group, p=%.2g); freq-IRB r=%.3f p=%.3g (n=25)", delta,
                                            day.size(), p_shift, corr.r, corr.p)};
  });

  criterion(10, "pipeline reruns are byte-identical", 300.0, [] {
    auto config = parse_config(text::read_file(fs::path(EGOCOMM_SOURCE_DIR) / "configs/easy.ini"));
    const auto base = fs::temp_directory_path() / "egocomm_acceptance_determinism";
    fs::remove_all(base);
    std::vector<std::map<std::string, std::string>> manifests(2);
    std::vector<std::string> trees(2);
    for (int run = 0; run < 2; ++run) {
      config.data_root = base / ("run" + std::to_string(run));
      config.output_root = config.data_root / "runs";
      for (auto stage : pipeline::kStages) pipeline::run_stage(stage, config);
      for (auto stage : pipeline::kStages)
        manifests[run][std::string(stage)] =
            text::read_file(config.output_root / std::string(stage) / "stage_manifest.json");
      trees[run] = sha256_tree(config.output_root);
    }
    fs::remove_all(base);
    return Outcome{manifests[0] == manifests[1] && trees[0] == trees[1],
                   fmt("%zu stage manifests compared; output tree %s", manifests[0].size(),
                       trees[0] == trees[1] ? "identical" : "differs")};
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
