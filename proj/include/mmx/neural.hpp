#pragma once

// Feed-forward ReLU network with a flat parameter vector, TD-regression
// gradients and Adam. All arithmetic in double precision.

#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmx/core.hpp"

namespace mmx {

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden{64, 64};
  int output_dim = 1;

  bool operator==(const MlpSpec&) const = default;

  void validate() const {
    if (input_dim < 1 || output_dim < 1) throw Error(Errc::DimensionMismatch, "layer width < 1");
    for (int h : hidden) {
      if (h < 1) throw Error(Errc::DimensionMismatch, "hidden width < 1");
    }
  }

  /// Widths of every layer boundary, input first.
  std::vector<int> widths() const {
    std::vector<int> w{input_dim};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(output_dim);
    return w;
  }
};

struct LayerLayout {
  int in = 0;
  int out = 0;
  std::size_t weights = 0;  // offset of the out x in column-major block
  std::size_t bias = 0;     // offset of the out-length bias block
};

inline std::vector<LayerLayout> layout(const MlpSpec& spec) {
  const auto w = spec.widths();
  std::vector<LayerLayout> layers;
  std::size_t offset = 0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    LayerLayout l{w[i], w[i + 1], offset, offset + static_cast<std::size_t>(w[i]) * w[i + 1]};
    offset = l.bias + l.out;
    layers.push_back(l);
  }
  return layers;
}

inline std::size_t parameter_count(const MlpSpec& spec) {
  const auto layers = layout(spec);
  return layers.back().bias + layers.back().out;
}

struct ParameterSet {
  MlpSpec spec;
  std::vector<double> values;

  bool operator==(const ParameterSet&) const = default;
};

/// He-uniform weights, zero biases.
inline ParameterSet init_parameters(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ParameterSet p{spec, std::vector<double>(parameter_count(spec), 0.0)};
  for (const auto& l : layout(spec)) {
    const double limit = std::sqrt(6.0 / l.in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < static_cast<std::size_t>(l.in) * l.out; ++i) {
      p.values[l.weights + i] = dist(rng);
    }
  }
  return p;
}

namespace detail {

using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

inline void check_params(const ParameterSet& p) {
  if (p.values.size() != parameter_count(p.spec)) {
    throw Error(Errc::DimensionMismatch, "parameter vector does not match layout");
  }
}

/// Activations of every layer for a column batch; front() is the input.
inline std::vector<Eigen::MatrixXd> forward_all(const ParameterSet& p, Eigen::MatrixXd input) {
  check_params(p);
  if (input.rows() != p.spec.input_dim) throw Error(Errc::DimensionMismatch, "input width");
  const auto layers = layout(p.spec);
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(layers.size() + 1);
  acts.push_back(std::move(input));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    ConstMatrixMap w(p.values.data() + l.weights, l.out, l.in);
    ConstVectorMap b(p.values.data() + l.bias, l.out);
    Eigen::MatrixXd z = w * acts.back();
    z.colwise() += b;
    if (i + 1 < layers.size()) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace detail

/// Q-values for a batch stored one sample per column.
inline Eigen::MatrixXd forward_batch(const ParameterSet& p, Eigen::MatrixXd inputs) {
  return std::move(detail::forward_all(p, std::move(inputs)).back());
}

inline std::vector<double> forward(const ParameterSet& p, std::span<const double> state) {
  if (state.size() != static_cast<std::size_t>(p.spec.input_dim)) {
    throw Error(Errc::DimensionMismatch, "state length " + std::to_string(state.size()) +
                                             " != input_dim " + std::to_string(p.spec.input_dim));
  }
  Eigen::MatrixXd x = detail::ConstVectorMap(state.data(), state.size());
  Eigen::MatrixXd q = forward_batch(p, std::move(x));
  return {q.data(), q.data() + q.size()};
}

enum class Loss { MeanSquared, Huber };

struct TdSample {
  std::span<const double> state;
  int action = 0;
  double target = 0.0;
};

struct GradientResult {
  std::vector<double> gradient;
  double loss = 0.0;
};

/// Gradient of the batch-mean TD loss, taken only at each sample's action.
inline GradientResult backward(const ParameterSet& p, std::span<const TdSample> batch,
                               Loss loss = Loss::MeanSquared) {
  if (batch.empty()) throw Error(Errc::DimensionMismatch, "empty batch");
  const int n = static_cast<int>(batch.size());
  Eigen::MatrixXd x(p.spec.input_dim, n);
  for (int j = 0; j < n; ++j) {
    if (batch[j].state.size() != static_cast<std::size_t>(p.spec.input_dim)) {
      throw Error(Errc::DimensionMismatch, "state length in batch");
    }
    if (batch[j].action < 0 || batch[j].action >= p.spec.output_dim) {
      throw Error(Errc::DimensionMismatch, "action index out of range");
    }
    x.col(j) = detail::ConstVectorMap(batch[j].state.data(), p.spec.input_dim);
  }
  const auto acts = detail::forward_all(p, std::move(x));
  const auto layers = layout(p.spec);

  GradientResult result{std::vector<double>(p.values.size(), 0.0), 0.0};
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(p.spec.output_dim, n);
  for (int j = 0; j < n; ++j) {
    const double err = acts.back()(batch[j].action, j) - batch[j].target;
    if (loss == Loss::MeanSquared || std::abs(err) <= 1.0) {
      result.loss += loss == Loss::MeanSquared ? err * err : 0.5 * err * err;
      delta(batch[j].action, j) = (loss == Loss::MeanSquared ? 2.0 * err : err) / n;
    } else {
      result.loss += std::abs(err) - 0.5;
      delta(batch[j].action, j) = (err > 0 ? 1.0 : -1.0) / n;
    }
  }
  result.loss /= n;

  for (std::size_t i = layers.size(); i-- > 0;) {
    const auto& l = layers[i];
    Eigen::Map<Eigen::MatrixXd> gw(result.gradient.data() + l.weights, l.out, l.in);
    Eigen::Map<Eigen::VectorXd> gb(result.gradient.data() + l.bias, l.out);
    gw.noalias() = delta * acts[i].transpose();
    gb = delta.rowwise().sum();
    if (i == 0) break;
    detail::ConstMatrixMap w(p.values.data() + l.weights, l.out, l.in);
    Eigen::MatrixXd back = w.transpose() * delta;
    delta = back.cwiseProduct((acts[i].array() > 0.0).cast<double>().matrix());
  }
  return result;
}

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  static AdamState for_parameters(const ParameterSet& p, double learning_rate = 1e-3) {
    if (!(learning_rate > 0.0)) throw Error(Errc::ConfigInvalid, "learning rate must be > 0");
    AdamState s;
    s.learning_rate = learning_rate;
    s.m.assign(p.values.size(), 0.0);
    s.v.assign(p.values.size(), 0.0);
    return s;
  }
};

inline void adam_step(ParameterSet& p, std::span<const double> grad, AdamState& s) {
  if (grad.size() != p.values.size() || s.m.size() != p.values.size() ||
      s.v.size() != p.values.size()) {
    throw Error(Errc::DimensionMismatch, "gradient / optimizer state shape");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw Error(Errc::NonFiniteGradient, "gradient contains NaN or inf");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    p.values[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

// Binary parameter file: "MMXNET" magic, u32 format version, u32 layer
// count followed by every boundary width, u64 value count, then the values.
// All integers and doubles little-endian.

inline constexpr std::uint32_t kNetFormatVersion = 1;

namespace io {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 4);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw Error(Errc::FormatVersionMismatch, "truncated parameter file");
  }
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw Error(Errc::FormatVersionMismatch, "truncated parameter file");
  }
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

}  // namespace io

inline void write_parameters(std::ostream& out, const ParameterSet& p) {
  out.write("MMXNET", 6);
  io::put_u32(out, kNetFormatVersion);
  const auto widths = p.spec.widths();
  io::put_u32(out, static_cast<std::uint32_t>(widths.size()));
  for (int w : widths) io::put_u32(out, static_cast<std::uint32_t>(w));
  io::put_u64(out, p.values.size());
  for (double v : p.values) io::put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline ParameterSet read_parameters(std::istream& in) {
  char magic[6];
  if (!in.read(magic, 6) || std::string(magic, 6) != "MMXNET") {
    throw Error(Errc::FormatVersionMismatch, "missing parameter file magic");
  }
  const auto version = io::get_u32(in);
  if (version != kNetFormatVersion) {
    throw Error(Errc::FormatVersionMismatch, "parameter format version " + std::to_string(version));
  }
  const auto n_widths = io::get_u32(in);
  if (n_widths < 2 || n_widths > 64) throw Error(Errc::FormatVersionMismatch, "layer count");
  std::vector<int> widths(n_widths);
  for (auto& w : widths) w = static_cast<int>(io::get_u32(in));
  ParameterSet p;
  p.spec.input_dim = widths.front();
  p.spec.output_dim = widths.back();
  p.spec.hidden.assign(widths.begin() + 1, widths.end() - 1);
  p.spec.validate();
  const auto count = io::get_u64(in);
  if (count != parameter_count(p.spec)) {
    throw Error(Errc::FormatVersionMismatch, "value count does not match layout");
  }
  p.values.resize(count);
  for (auto& v : p.values) v = std::bit_cast<double>(io::get_u64(in));
  return p;
}

}  // namespace mmx
