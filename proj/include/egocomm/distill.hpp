#pragma once

// Teacher-student distillation for the frame classifier.
//
//   total = CE(student, labels) + alpha * KL(teacher || student)
//
// Both terms are means over frames. Student posteriors are floored at
// kPosteriorFloor before taking logs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "egocomm/error.hpp"
#include "egocomm/io.hpp"
#include "egocomm/student_model.hpp"
#include "egocomm/types.hpp"

namespace egocomm {

inline constexpr double kPosteriorFloor = 1e-12;

struct LossBreakdown {
  double ce = 0.0;
  double kld = 0.0;
  double total = 0.0;
};

namespace detail {
inline void check_loss_shapes(const Matrix& student, const Matrix& teacher, std::span<const FrameClass> labels) {
  if (student.cols != kNumClasses) fail(ErrorCode::ShapeMismatch, "student posteriors must have 3 columns");
  if (!teacher.empty() && (teacher.rows != student.rows || teacher.cols != kNumClasses))
    fail(ErrorCode::ShapeMismatch, "teacher posteriors do not match student shape");
  if (labels.size() != student.rows) fail(ErrorCode::ShapeMismatch, "label count does not match frame count");
  if (student.rows == 0) fail(ErrorCode::ShapeMismatch, "empty window");
}

inline void check_finite(const LossBreakdown& l) {
  if (!std::isfinite(l.ce) || !std::isfinite(l.kld) || !std::isfinite(l.total))
    fail(ErrorCode::NonFiniteLoss, "loss is not finite");
}
}  // namespace detail

/// Loss from posteriors. An empty teacher matrix contributes kld = 0.
inline LossBreakdown distill_loss(const Matrix& student_post, const Matrix& teacher_post,
                                  std::span<const FrameClass> labels, double alpha) {
  detail::check_loss_shapes(student_post, teacher_post, labels);
  const std::size_t T = student_post.rows;
  double ce = 0.0, kld = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const auto y = static_cast<std::size_t>(labels[t]);
    ce -= std::log(std::max(student_post(t, y), kPosteriorFloor));
    if (teacher_post.empty()) continue;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const double p = teacher_post(t, c);
      if (p > 0.0) kld += p * (std::log(p) - std::log(std::max(student_post(t, c), kPosteriorFloor)));
    }
  }
  LossBreakdown out;
  out.ce = ce / static_cast<double>(T);
  out.kld = std::max(0.0, kld / static_cast<double>(T));
  out.total = out.ce + alpha * out.kld;
  detail::check_finite(out);
  return out;
}

/// Loss and its gradient with respect to the logits (mean over frames).
inline std::pair<LossBreakdown, Matrix> distill_loss_logit_grad(const Matrix& logits, const Matrix& teacher_post,
                                                                std::span<const FrameClass> labels, double alpha) {
  const Matrix post = softmax_rows(logits);
  LossBreakdown loss = distill_loss(post, teacher_post, labels, alpha);
  const std::size_t T = logits.rows;
  const double inv_t = 1.0 / static_cast<double>(T);
  Matrix grad(T, kNumClasses);
  for (std::size_t t = 0; t < T; ++t) {
    const auto y = static_cast<std::size_t>(labels[t]);
    // d/dz_j [-log s_y] = s_j - [j == y], zero when s_y sits on the floor.
    if (post(t, y) >= kPosteriorFloor)
      for (std::size_t j = 0; j < kNumClasses; ++j) grad(t, j) += post(t, j) - (j == y ? 1.0 : 0.0);
    if (!teacher_post.empty() && alpha != 0.0) {
      // d/dz_j [-sum_c p_c log s_c] over unfloored classes c.
      double mass = 0.0;
      for (std::size_t c = 0; c < kNumClasses; ++c)
        if (post(t, c) >= kPosteriorFloor) mass += teacher_post(t, c);
      for (std::size_t j = 0; j < kNumClasses; ++j) {
        double g = post(t, j) * mass;
        if (post(t, j) >= kPosteriorFloor) g -= teacher_post(t, j);
        grad(t, j) += alpha * g;
      }
    }
    for (std::size_t j = 0; j < kNumClasses; ++j) grad(t, j) *= inv_t;
  }
  return {loss, std::move(grad)};
}

/// Exact gradient of LossBreakdown::total with respect to every parameter.
inline std::vector<double> backward(const StudentModel& model, const Matrix& window, const Matrix& teacher_post,
                                    std::span<const FrameClass> labels, double alpha,
                                    LossBreakdown* loss_out = nullptr) {
  const auto cache = forward_cached(model, window);
  auto [loss, d_logits] = distill_loss_logit_grad(cache.logits, teacher_post, labels, alpha);
  if (loss_out) *loss_out = loss;
  return backprop(model, cache, d_logits);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 5e-5;
  int epochs = 15;
  double alpha = 5.0;
  int window_frames = 1000;  // 10 s
  int batch_size = 8;
  std::uint64_t seed = 1;
  ModelConfig model;
  // Adam constants.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) fail(ErrorCode::BadConfig, "learning_rate must be > 0");
  if (c.epochs < 0) fail(ErrorCode::BadConfig, "epochs must be >= 0");
  if (!(c.alpha >= 0.0)) fail(ErrorCode::BadConfig, "alpha must be >= 0");
  if (c.window_frames < 1 || c.window_frames > static_cast<int>(kMaxFramesPerRecording))
    fail(ErrorCode::BadConfig, "window_frames must be in [1, 2000]");
  if (c.batch_size < 1) fail(ErrorCode::BadConfig, "batch_size must be >= 1");
  validate(c.model);
}

struct TrainingWindow {
  Matrix features;                // [T x 12]
  std::vector<FrameClass> labels;  // T
  Matrix teacher;                  // [T x 3], or empty
};

/// Non-overlapping [begin, end) frame ranges of at most `window` frames. A
/// trailing piece shorter than `min_len` is merged into the previous window.
inline std::vector<std::pair<std::size_t, std::size_t>> tile_windows(std::size_t n, std::size_t window,
                                                                     std::size_t min_len) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < n; b += window) out.emplace_back(b, std::min(n, b + window));
  if (out.size() > 1 && out.back().second - out.back().first < min_len) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

/// Cuts labelled corpus recordings into training windows. Recordings without
/// labels are skipped.
inline std::vector<TrainingWindow> make_training_windows(std::span<const CorpusItem> items, int window_frames,
                                                         int min_frames = 1) {
  std::vector<TrainingWindow> out;
  for (const auto& item : items) {
    if (!item.recording.labels) continue;
    const auto& rec = item.recording;
    if (item.teacher) check_alignment(*item.teacher, rec);
    for (auto [b, e] : tile_windows(rec.frames.size(), static_cast<std::size_t>(window_frames),
                                    static_cast<std::size_t>(min_frames))) {
      if (e - b < static_cast<std::size_t>(min_frames)) continue;
      TrainingWindow w;
      w.features = mfcc_matrix(rec, b, e);
      w.labels.assign(rec.labels->begin() + static_cast<std::ptrdiff_t>(b),
                      rec.labels->begin() + static_cast<std::ptrdiff_t>(e));
      if (item.teacher) {
        w.teacher = Matrix(e - b, kNumClasses);
        for (std::size_t t = b; t < e; ++t)
          std::copy(item.teacher->rows[t].begin(), item.teacher->rows[t].end(), w.teacher.row(t - b));
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

/// Sets the model's input standardization from the pooled training frames.
inline void fit_input_normalization(StudentModel& model, std::span<const TrainingWindow> windows) {
  std::array<double, kNumMfcc> sum{}, sumsq{};
  double n = 0.0;
  for (const auto& w : windows)
    for (std::size_t t = 0; t < w.features.rows; ++t) {
      for (std::size_t k = 0; k < kNumMfcc; ++k) {
        sum[k] += w.features(t, k);
        sumsq[k] += w.features(t, k) * w.features(t, k);
      }
      n += 1.0;
    }
  if (n == 0.0) return;
  for (std::size_t k = 0; k < kNumMfcc; ++k) {
    const double m = sum[k] / n;
    const double var = std::max(0.0, sumsq[k] / n - m * m);
    model.input_mean()[k] = m;
    model.input_scale()[k] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  }
}

struct TrainResult {
  StudentModel model;
  std::vector<LossBreakdown> history;  // one per epoch, frame-weighted means
};

using EpochCallback = std::function<void(int epoch, const LossBreakdown&)>;

/// Adam training of the student on `windows`. Without `init`, the model is
/// freshly initialized from config.seed and its input standardization is fit
/// to the data. Batch order is a seeded shuffle per epoch.
inline TrainResult train(std::span<const TrainingWindow> windows, const TrainConfig& config,
                         std::optional<StudentModel> init = std::nullopt, const EpochCallback& on_epoch = {}) {
  validate(config);
  if (windows.empty()) fail(ErrorCode::EmptyDataset, "no training windows");
  for (const auto& w : windows) {
    if (w.labels.size() != w.features.rows) fail(ErrorCode::ShapeMismatch, "labels not aligned to frames");
    if (!w.teacher.empty() && w.teacher.rows != w.features.rows)
      fail(ErrorCode::ShapeMismatch, "teacher rows not aligned to frames");
  }

  TrainResult result;
  if (init) {
    if (init->config() != config.model) fail(ErrorCode::ShapeMismatch, "initial model config differs from TrainConfig");
    result.model = std::move(*init);
  } else {
    result.model = StudentModel(config.model);
    result.model.initialize(config.seed);
    fit_input_normalization(result.model, windows);
  }

  auto& model = result.model;
  const std::size_t P = model.parameters().size();
  std::vector<double> m(P, 0.0), v(P, 0.0), grad(P);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uint64_t step = 0;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double ce_sum = 0.0, kld_sum = 0.0, frames_seen = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      double batch_frames = 0.0;
      for (std::size_t i = start; i < end; ++i) batch_frames += static_cast<double>(windows[order[i]].features.rows);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& w = windows[order[i]];
        LossBreakdown loss;
        const auto g = backward(model, w.features, w.teacher, w.labels, config.alpha, &loss);
        const double weight = static_cast<double>(w.features.rows) / batch_frames;
        for (std::size_t j = 0; j < P; ++j) grad[j] += weight * g[j];
        ce_sum += loss.ce * static_cast<double>(w.features.rows);
        kld_sum += loss.kld * static_cast<double>(w.features.rows);
      }
      frames_seen += batch_frames;
      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto params = model.parameters();
      for (std::size_t j = 0; j < P; ++j) {
        m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * grad[j];
        v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * grad[j] * grad[j];
        params[j] -= config.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + config.epsilon);
      }
    }
    LossBreakdown epoch_loss;
    epoch_loss.ce = ce_sum / frames_seen;
    epoch_loss.kld = kld_sum / frames_seen;
    epoch_loss.total = epoch_loss.ce + config.alpha * epoch_loss.kld;
    if (!std::isfinite(epoch_loss.total) ||
        std::any_of(model.parameters().begin(), model.parameters().end(), [](double p) { return !std::isfinite(p); }))
      fail(ErrorCode::NonFiniteLoss, "training diverged at epoch " + std::to_string(epoch));
    result.history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inference

/// Argmax with ties resolved in class order FG < BG < S.
inline FrameClass argmax_class(const double* row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumClasses; ++k)
    if (row[k] > row[best]) best = k;
  return static_cast<FrameClass>(best);
}

/// Per-frame labels for a recording, classifying non-overlapping windows of
/// `window_frames`. A trailing piece shorter than the kernel is folded into
/// the previous window.
inline std::vector<FrameClass> infer_labels(const StudentModel& model, const Recording& recording,
                                            int window_frames = 1000) {
  const std::size_t K = model.kernel();
  if (recording.frames.size() < K)
    fail(ErrorCode::TooShort, recording.recording_id + ": " + std::to_string(recording.frames.size()) +
                                  " frames, kernel width " + std::to_string(K));
  if (window_frames < 1) fail(ErrorCode::BadConfig, "window_frames must be >= 1");
  std::vector<FrameClass> labels;
  labels.reserve(recording.frames.size());
  for (auto [b, e] : tile_windows(recording.frames.size(), static_cast<std::size_t>(window_frames), K)) {
    const Matrix post = forward(model, mfcc_matrix(recording, b, e));
    for (std::size_t t = 0; t < post.rows; ++t) labels.push_back(argmax_class(post.row(t)));
  }
  return labels;
}

inline std::size_t count_windows(std::size_t frames, int window_frames, std::size_t kernel) {
  return tile_windows(frames, static_cast<std::size_t>(window_frames), kernel).size();
}

}  // namespace egocomm
