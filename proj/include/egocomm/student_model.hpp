#pragma once

// Frame classifier over MFCC 1-12: a same-padded 1-D convolutional stem,
// R residual blocks (two convolutions each, identity skip), and a per-frame
// linear head producing FG/BG/S logits. Activations are ELU (alpha = 1).
//
//   h0   = elu(conv_stem(x))
//   u    = conv1(h);  a = elu(u);  v = conv2(a);  h' = elu(h + v)
//   z(t) = W_head h_R(t) + b_head
//
// Feature maps are time-major [T x C]. Convolution weights are [C_out][K][C_in].

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "egocomm/error.hpp"
#include "egocomm/text.hpp"
#include "egocomm/types.hpp"

namespace egocomm {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  bool empty() const { return data.empty(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct ModelConfig {
  int residual_blocks = 2;
  int channels = 32;
  int kernel_width = 5;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void validate(const ModelConfig& c) {
  if (c.residual_blocks < 1) fail(ErrorCode::BadConfig, "residual_blocks must be >= 1");
  if (c.channels < 4) fail(ErrorCode::BadConfig, "channels must be >= 4");
  if (c.kernel_width < 1 || c.kernel_width % 2 == 0) fail(ErrorCode::BadConfig, "kernel_width must be odd");
}

struct ParamShape {
  std::string name;
  std::vector<std::size_t> dims;
  std::size_t offset = 0;
  std::size_t size = 0;

  friend bool operator==(const ParamShape&, const ParamShape&) = default;
};

class StudentModel {
 public:
  StudentModel() : StudentModel(ModelConfig{}) {}

  explicit StudentModel(const ModelConfig& config) : config_(config) {
    validate(config_);
    const std::size_t C = channels(), K = kernel();
    add("stem.weight", {C, K, kNumMfcc});
    add("stem.bias", {C});
    for (int b = 0; b < config_.residual_blocks; ++b) {
      const std::string p = "block" + std::to_string(b);
      add(p + ".conv1.weight", {C, K, C});
      add(p + ".conv1.bias", {C});
      add(p + ".conv2.weight", {C, K, C});
      add(p + ".conv2.bias", {C});
    }
    add("head.weight", {kNumClasses, C});
    add("head.bias", {kNumClasses});
    params_.assign(total_, 0.0);
    input_mean_.fill(0.0);
    input_scale_.fill(1.0);
  }

  const ModelConfig& config() const { return config_; }
  std::size_t channels() const { return static_cast<std::size_t>(config_.channels); }
  std::size_t kernel() const { return static_cast<std::size_t>(config_.kernel_width); }
  std::size_t blocks() const { return static_cast<std::size_t>(config_.residual_blocks); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  const std::vector<ParamShape>& shapes() const { return shapes_; }

  const ParamShape& shape(const std::string& name) const {
    for (const auto& s : shapes_)
      if (s.name == name) return s;
    fail(ErrorCode::ShapeMismatch, "no parameter named " + name);
  }
  std::span<double> tensor(const std::string& name) {
    const auto& s = shape(name);
    return std::span<double>(params_).subspan(s.offset, s.size);
  }
  std::span<const double> tensor(const std::string& name) const {
    const auto& s = shape(name);
    return std::span<const double>(params_).subspan(s.offset, s.size);
  }

  // Fixed per-coefficient standardization applied before the stem:
  // x' = (x - mean) * scale.
  std::array<double, kNumMfcc>& input_mean() { return input_mean_; }
  const std::array<double, kNumMfcc>& input_mean() const { return input_mean_; }
  std::array<double, kNumMfcc>& input_scale() { return input_scale_; }
  const std::array<double, kNumMfcc>& input_scale() const { return input_scale_; }

  /// Uniform fan-in initialization of weights; biases zero.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const auto& s : shapes_) {
      auto t = std::span<double>(params_).subspan(s.offset, s.size);
      if (s.dims.size() == 1) {
        std::fill(t.begin(), t.end(), 0.0);
        continue;
      }
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < s.dims.size(); ++i) fan_in *= s.dims[i];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& w : t) w = dist(rng);
    }
  }

  friend bool operator==(const StudentModel&, const StudentModel&) = default;

 private:
  void add(std::string name, std::vector<std::size_t> dims) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    shapes_.push_back({std::move(name), std::move(dims), total_, n});
    total_ += n;
  }

  ModelConfig config_;
  std::vector<ParamShape> shapes_;
  std::size_t total_ = 0;
  std::vector<double> params_;
  std::array<double, kNumMfcc> input_mean_{};
  std::array<double, kNumMfcc> input_scale_{};
};

/// MFCC matrix [T x 12] for frames [begin, end) of a recording.
inline Matrix mfcc_matrix(const Recording& rec, std::size_t begin = 0, std::size_t end = SIZE_MAX) {
  end = std::min(end, rec.frames.size());
  Matrix m(end - begin, kNumMfcc);
  for (std::size_t t = begin; t < end; ++t)
    std::copy(rec.frames[t].mfcc.begin(), rec.frames[t].mfcc.end(), m.row(t - begin));
  return m;
}

namespace nn {

inline double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
inline double elu_grad(double z) { return z > 0.0 ? 1.0 : std::exp(z); }

/// out = conv(in, W) + b with zero "same" padding.
inline Matrix conv1d(const Matrix& in, std::span<const double> W, std::span<const double> b, std::size_t c_out,
                     std::size_t K) {
  const std::size_t T = in.rows, c_in = in.cols, half = K / 2;
  Matrix out(T, c_out);
  for (std::size_t t = 0; t < T; ++t) {
    double* o = out.row(t);
    for (std::size_t co = 0; co < c_out; ++co) o[co] = b[co];
    for (std::size_t k = 0; k < K; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(half);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      const double* x = in.row(static_cast<std::size_t>(src));
      for (std::size_t co = 0; co < c_out; ++co) {
        const double* w = W.data() + (co * K + k) * c_in;
        double acc = 0.0;
        for (std::size_t ci = 0; ci < c_in; ++ci) acc += w[ci] * x[ci];
        o[co] += acc;
      }
    }
  }
  return out;
}

/// Accumulates dW, db and (optionally) d_in for one convolution.
inline void conv1d_backward(const Matrix& in, std::span<const double> W, const Matrix& d_out, std::size_t K,
                            std::span<double> dW, std::span<double> db, Matrix* d_in) {
  const std::size_t T = in.rows, c_in = in.cols, c_out = d_out.cols, half = K / 2;
  for (std::size_t t = 0; t < T; ++t) {
    const double* g = d_out.row(t);
    for (std::size_t co = 0; co < c_out; ++co) db[co] += g[co];
    for (std::size_t k = 0; k < K; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(half);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      const double* x = in.row(static_cast<std::size_t>(src));
      double* dx = d_in ? d_in->row(static_cast<std::size_t>(src)) : nullptr;
      for (std::size_t co = 0; co < c_out; ++co) {
        const double gc = g[co];
        if (gc == 0.0) continue;
        const std::size_t base = (co * K + k) * c_in;
        double* dw = dW.data() + base;
        for (std::size_t ci = 0; ci < c_in; ++ci) dw[ci] += gc * x[ci];
        if (dx) {
          const double* w = W.data() + base;
          for (std::size_t ci = 0; ci < c_in; ++ci) dx[ci] += gc * w[ci];
        }
      }
    }
  }
}

}  // namespace nn

/// Intermediate activations kept for backpropagation.
struct ForwardCache {
  Matrix input;                 // standardized input
  Matrix stem_pre;              // conv_stem(x)
  std::vector<Matrix> hidden;   // h_0 .. h_R
  std::vector<Matrix> conv1_pre, conv1_act, residual_pre;
  Matrix logits;
};

inline ForwardCache forward_cached(const StudentModel& model, const Matrix& window) {
  if (window.cols != kNumMfcc)
    fail(ErrorCode::ShapeMismatch, "expected " + std::to_string(kNumMfcc) + " features per frame, got " +
                                       std::to_string(window.cols));
  const std::size_t T = window.rows, C = model.channels(), K = model.kernel();
  ForwardCache c;
  c.input = Matrix(T, kNumMfcc);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < kNumMfcc; ++k)
      c.input(t, k) = (window(t, k) - model.input_mean()[k]) * model.input_scale()[k];

  c.stem_pre = nn::conv1d(c.input, model.tensor("stem.weight"), model.tensor("stem.bias"), C, K);
  Matrix h = c.stem_pre;
  for (double& v : h.data) v = nn::elu(v);
  c.hidden.push_back(h);

  for (std::size_t b = 0; b < model.blocks(); ++b) {
    const std::string p = "block" + std::to_string(b);
    Matrix u = nn::conv1d(c.hidden.back(), model.tensor(p + ".conv1.weight"), model.tensor(p + ".conv1.bias"), C, K);
    Matrix a = u;
    for (double& v : a.data) v = nn::elu(v);
    Matrix s = nn::conv1d(a, model.tensor(p + ".conv2.weight"), model.tensor(p + ".conv2.bias"), C, K);
    const Matrix& prev = c.hidden.back();
    for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] += prev.data[i];
    Matrix next = s;
    for (double& v : next.data) v = nn::elu(v);
    c.conv1_pre.push_back(std::move(u));
    c.conv1_act.push_back(std::move(a));
    c.residual_pre.push_back(std::move(s));
    c.hidden.push_back(std::move(next));
  }

  const auto Wh = model.tensor("head.weight");
  const auto bh = model.tensor("head.bias");
  const Matrix& top = c.hidden.back();
  c.logits = Matrix(T, kNumClasses);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      double acc = bh[k];
      for (std::size_t ch = 0; ch < C; ++ch) acc += Wh[k * C + ch] * top(t, ch);
      c.logits(t, k) = acc;
    }
  return c;
}

/// Row-wise softmax.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  for (std::size_t t = 0; t < logits.rows; ++t) {
    const double* z = logits.row(t);
    const double zmax = *std::max_element(z, z + logits.cols);
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.cols; ++k) sum += (out(t, k) = std::exp(z[k] - zmax));
    for (std::size_t k = 0; k < logits.cols; ++k) out(t, k) /= sum;
  }
  return out;
}

/// Frame posteriors [T x 3] for a window of MFCC frames [T x 12].
inline Matrix forward(const StudentModel& model, const Matrix& window) {
  return softmax_rows(forward_cached(model, window).logits);
}

/// Parameter gradient given dLoss/dlogits for a cached forward pass.
inline std::vector<double> backprop(const StudentModel& model, const ForwardCache& c, const Matrix& d_logits) {
  const std::size_t T = c.input.rows, C = model.channels(), K = model.kernel();
  std::vector<double> grad(model.parameters().size(), 0.0);
  auto slot = [&](const std::string& name) {
    const auto& s = model.shape(name);
    return std::span<double>(grad).subspan(s.offset, s.size);
  };

  const auto Wh = model.tensor("head.weight");
  auto dWh = slot("head.weight");
  auto dbh = slot("head.bias");
  const Matrix& top = c.hidden.back();
  Matrix dh(T, C);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      const double g = d_logits(t, k);
      dbh[k] += g;
      for (std::size_t ch = 0; ch < C; ++ch) {
        dWh[k * C + ch] += g * top(t, ch);
        dh(t, ch) += g * Wh[k * C + ch];
      }
    }

  for (std::size_t bi = model.blocks(); bi-- > 0;) {
    const std::string p = "block" + std::to_string(bi);
    Matrix ds = dh;
    const Matrix& s = c.residual_pre[bi];
    for (std::size_t i = 0; i < ds.data.size(); ++i) ds.data[i] *= nn::elu_grad(s.data[i]);
    Matrix da(T, C);
    nn::conv1d_backward(c.conv1_act[bi], model.tensor(p + ".conv2.weight"), ds, K, slot(p + ".conv2.weight"),
                        slot(p + ".conv2.bias"), &da);
    const Matrix& u = c.conv1_pre[bi];
    for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] *= nn::elu_grad(u.data[i]);
    Matrix dprev = ds;  // identity skip
    nn::conv1d_backward(c.hidden[bi], model.tensor(p + ".conv1.weight"), da, K, slot(p + ".conv1.weight"),
                        slot(p + ".conv1.bias"), &dprev);
    dh = std::move(dprev);
  }

  for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] *= nn::elu_grad(c.stem_pre.data[i]);
  nn::conv1d_backward(c.input, model.tensor("stem.weight"), dh, K, slot("stem.weight"), slot("stem.bias"), nullptr);
  return grad;
}

// ---------------------------------------------------------------------------
// Checkpoint: line-oriented text, doubles in shortest round-trip form.
//
//   egocomm-student 1
//   config <residual_blocks> <channels> <kernel_width>
//   input_mean <12 values>
//   input_scale <12 values>
//   shape <name> <offset> <size> <dims...>     (one per tensor)
//   parameters <count>
//   <one value per line>

inline constexpr int kCheckpointVersion = 1;

inline std::string save_checkpoint(const StudentModel& model) {
  std::string out = "egocomm-student " + std::to_string(kCheckpointVersion) + "\n";
  const auto& cfg = model.config();
  out += "config " + std::to_string(cfg.residual_blocks) + ' ' + std::to_string(cfg.channels) + ' ' +
         std::to_string(cfg.kernel_width) + '\n';
  out += "input_mean";
  for (double v : model.input_mean()) (out += ' ') += text::format_double(v);
  out += "\ninput_scale";
  for (double v : model.input_scale()) (out += ' ') += text::format_double(v);
  out += '\n';
  for (const auto& s : model.shapes()) {
    out += "shape " + s.name + ' ' + std::to_string(s.offset) + ' ' + std::to_string(s.size);
    for (auto d : s.dims) (out += ' ') += std::to_string(d);
    out += '\n';
  }
  out += "parameters " + std::to_string(model.parameters().size()) + '\n';
  for (double v : model.parameters()) (out += text::format_double(v)) += '\n';
  return out;
}

inline StudentModel load_checkpoint(std::string_view bytes) {
  const auto rows = text::lines(bytes);
  std::size_t i = 0;
  auto next = [&]() -> std::vector<std::string_view> {
    if (i >= rows.size()) fail(ErrorCode::BadCheckpoint, "truncated checkpoint");
    return text::split(rows[i++].second, ' ');
  };
  auto number = [](std::string_view s) {
    double v = 0.0;
    if (!text::parse_double(s, v)) fail(ErrorCode::BadCheckpoint, "bad number '" + std::string(s) + "'");
    return v;
  };
  auto integer = [](std::string_view s) {
    long long v = 0;
    if (!text::parse_int(s, v) || v < 0) fail(ErrorCode::BadCheckpoint, "bad integer '" + std::string(s) + "'");
    return static_cast<std::size_t>(v);
  };

  auto head = next();
  if (head.size() != 2 || head[0] != "egocomm-student" || integer(head[1]) != kCheckpointVersion)
    fail(ErrorCode::BadCheckpoint, "unrecognized header");
  auto cfg_row = next();
  if (cfg_row.size() != 4 || cfg_row[0] != "config") fail(ErrorCode::BadCheckpoint, "missing config");
  ModelConfig cfg{static_cast<int>(integer(cfg_row[1])), static_cast<int>(integer(cfg_row[2])),
                  static_cast<int>(integer(cfg_row[3]))};
  StudentModel model(cfg);
  for (auto* target : {&model.input_mean(), &model.input_scale()}) {
    auto row = next();
    if (row.size() != 1 + kNumMfcc) fail(ErrorCode::BadCheckpoint, "bad normalization row");
    for (std::size_t k = 0; k < kNumMfcc; ++k) (*target)[k] = number(row[1 + k]);
  }
  for (const auto& expected : model.shapes()) {
    auto row = next();
    if (row.size() < 4 || row[0] != "shape" || row[1] != expected.name || integer(row[2]) != expected.offset ||
        integer(row[3]) != expected.size || row.size() != 4 + expected.dims.size())
      fail(ErrorCode::BadCheckpoint, "shape registry mismatch at " + expected.name);
    for (std::size_t d = 0; d < expected.dims.size(); ++d)
      if (integer(row[4 + d]) != expected.dims[d]) fail(ErrorCode::BadCheckpoint, "dims mismatch at " + expected.name);
  }
  auto count = next();
  if (count.size() != 2 || count[0] != "parameters" || integer(count[1]) != model.parameters().size())
    fail(ErrorCode::BadCheckpoint, "parameter count mismatch");
  for (double& v : model.parameters()) {
    auto row = next();
    if (row.size() != 1) fail(ErrorCode::BadCheckpoint, "bad parameter row");
    v = number(row[0]);
  }
  if (i != rows.size()) fail(ErrorCode::BadCheckpoint, "trailing data");
  return model;
}

}  // namespace egocomm
