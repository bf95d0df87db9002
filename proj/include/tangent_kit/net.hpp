#pragma once

// Fully connected tanh networks with scalar output.
//
// Parameters live in one flat vector; each layer stores its weight matrix
// row-major followed by its bias. Under NTK scaling every weight product is
// multiplied by 1/sqrt(fan_in).

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tangent_kit/jets.hpp"
#include "tangent_kit/rng.hpp"

namespace tangent_kit {

enum class Scaling { ntk, standard };

inline std::string to_string(Scaling s) { return s == Scaling::ntk ? "ntk" : "standard"; }

inline Scaling parse_scaling(const std::string& s) {
  if (s == "ntk") return Scaling::ntk;
  if (s == "standard") return Scaling::standard;
  throw std::invalid_argument("unknown scaling '" + s + "'");
}

/// Fixed random Fourier features [cos(2 pi B x); sin(2 pi B x)].
struct FourierEmbedding {
  Eigen::MatrixXd B;  // n_feat x d_in
  double sigma = 1.0;
  std::uint64_t seed = 0;

  int n_feat() const { return static_cast<int>(B.rows()); }
  int d_in() const { return static_cast<int>(B.cols()); }
  int out_width() const { return 2 * n_feat(); }
};

inline FourierEmbedding make_fourier_embedding(int d_in, int n_feat, double sigma, std::uint64_t seed) {
  if (d_in < 1 || d_in > kMaxDim) throw std::invalid_argument("fourier embedding: d_in must be 1 or 2");
  if (n_feat < 1) throw std::invalid_argument("fourier embedding: n_feat must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("fourier embedding: sigma must be positive");
  FourierEmbedding e;
  e.sigma = sigma;
  e.seed = seed;
  e.B.resize(n_feat, d_in);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (int r = 0; r < n_feat; ++r) {
    for (int c = 0; c < d_in; ++c) e.B(r, c) = normal(rng);
  }
  return e;
}

/// Feature jets at `point`: cos block first, then sin block.
inline std::vector<SpatialJet<double>> embed_jets(const FourierEmbedding& e, std::span<const double> point) {
  const int d = e.d_in();
  if (static_cast<int>(point.size()) != d) throw std::invalid_argument("embed: point dimension mismatch");
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<SpatialJet<double>> out(static_cast<std::size_t>(e.out_width()));
  for (int r = 0; r < e.n_feat(); ++r) {
    double a = 0.0;
    for (int i = 0; i < d; ++i) a += e.B(r, i) * point[static_cast<std::size_t>(i)];
    a *= two_pi;
    const double c = std::cos(a);
    const double s = std::sin(a);
    SpatialJet<double>& jc = out[static_cast<std::size_t>(r)];
    SpatialJet<double>& js = out[static_cast<std::size_t>(r + e.n_feat())];
    jc.dim = js.dim = d;
    jc.value = c;
    js.value = s;
    for (int i = 0; i < d; ++i) {
      const double ai = two_pi * e.B(r, i);
      jc.grad[i] = -s * ai;
      js.grad[i] = c * ai;
      for (int j = i; j < d; ++j) {
        const double aij = ai * two_pi * e.B(r, j);
        jc.hess[hess_index(i, j)] = -c * aij;
        js.hess[hess_index(i, j)] = -s * aij;
      }
    }
  }
  return out;
}

inline Eigen::VectorXd embed(const FourierEmbedding& e, std::span<const double> point) {
  const auto jets = embed_jets(e, point);
  Eigen::VectorXd out(static_cast<Eigen::Index>(jets.size()));
  for (std::size_t k = 0; k < jets.size(); ++k) out[static_cast<Eigen::Index>(k)] = jets[k].value;
  return out;
}

struct LayerBlock {
  std::size_t offset = 0;  // W starts here, bias at offset + rows * cols
  int rows = 0;
  int cols = 0;

  std::size_t weight_count() const { return static_cast<std::size_t>(rows) * cols; }
  std::size_t bias_offset() const { return offset + weight_count(); }
  std::size_t size() const { return weight_count() + static_cast<std::size_t>(rows); }
};

struct MlpParams {
  Eigen::VectorXd theta;
  std::vector<LayerBlock> layout;
  std::vector<int> widths;  // d_in, hidden..., 1
  Scaling scaling = Scaling::ntk;
  std::optional<FourierEmbedding> embedding;
  std::string init = "gaussian";
  std::uint64_t seed = 0;

  int d_in() const { return widths.front(); }
  std::size_t size() const { return static_cast<std::size_t>(theta.size()); }
  double layer_scale(std::size_t l) const {
    return scaling == Scaling::ntk ? 1.0 / std::sqrt(static_cast<double>(layout[l].cols)) : 1.0;
  }
  std::span<const double> span() const { return {theta.data(), size()}; }

  /// Weight matrix of layer l as a row-major view.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> weight(std::size_t l) const {
    const LayerBlock& b = layout[l];
    return {theta.data() + b.offset, b.rows, b.cols};
  }
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const {
    const LayerBlock& b = layout[l];
    return {theta.data() + b.bias_offset(), b.rows};
  }
};

inline std::vector<LayerBlock> make_layout(const std::vector<int>& widths, int input_width) {
  if (widths.size() < 2) throw std::invalid_argument("network needs at least an input and an output width");
  if (widths.front() < 1 || widths.front() > kMaxDim) throw std::invalid_argument("input dimension must be 1 or 2");
  if (widths.back() != 1) throw std::invalid_argument("output width must be 1");
  std::vector<LayerBlock> layout;
  std::size_t offset = 0;
  int cols = input_width;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    if (widths[l] < 1) throw std::invalid_argument("zero-width layer");
    LayerBlock b{offset, widths[l], cols};
    offset += b.size();
    layout.push_back(b);
    cols = widths[l];
  }
  return layout;
}

inline MlpParams make_params(const std::vector<int>& widths, Scaling scaling,
                             std::optional<FourierEmbedding> embedding = std::nullopt) {
  MlpParams p;
  p.widths = widths;
  p.scaling = scaling;
  if (embedding && embedding->d_in() != widths.front()) {
    throw std::invalid_argument("fourier embedding dimension differs from network input");
  }
  const int input_width = embedding ? embedding->out_width() : widths.front();
  p.layout = make_layout(widths, input_width);
  p.embedding = std::move(embedding);
  std::size_t n = 0;
  for (const auto& b : p.layout) n += b.size();
  p.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  return p;
}

inline std::size_t param_count(const MlpParams& p) { return p.size(); }

/// Every parameter i.i.d. N(0, 1), NTK scaling.
inline MlpParams init_gaussian(const std::vector<int>& widths, std::uint64_t seed,
                               std::optional<FourierEmbedding> embedding = std::nullopt) {
  MlpParams p = make_params(widths, Scaling::ntk, std::move(embedding));
  p.init = "gaussian";
  p.seed = seed;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index k = 0; k < p.theta.size(); ++k) p.theta[k] = normal(rng);
  return p;
}

/// Xavier normal weights (variance 2 / (fan_in + fan_out)), zero biases.
inline MlpParams init_xavier(const std::vector<int>& widths, std::uint64_t seed,
                             std::optional<FourierEmbedding> embedding = std::nullopt,
                             Scaling scaling = Scaling::standard) {
  MlpParams p = make_params(widths, scaling, std::move(embedding));
  p.init = "xavier";
  p.seed = seed;
  Rng rng(seed);
  for (const auto& b : p.layout) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(b.rows + b.cols)));
    for (std::size_t k = 0; k < b.weight_count(); ++k) p.theta[static_cast<Eigen::Index>(b.offset + k)] = normal(rng);
  }
  return p;
}

/// Input-layer jets for `point`: raw coordinates or Fourier features.
inline std::vector<SpatialJet<double>> input_jets(const MlpParams& p, std::span<const double> point) {
  if (static_cast<int>(point.size()) != p.d_in()) throw std::invalid_argument("point dimension differs from network input");
  if (p.embedding) return embed_jets(*p.embedding, point);
  std::vector<SpatialJet<double>> in;
  for (int i = 0; i < p.d_in(); ++i) in.push_back(seed_input(point, i));
  return in;
}

/// Records the network evaluation at `point` on `tape`.
template <class T>
void record(const MlpParams& p, std::span<const double> point, Tape<T>& tape) {
  tape.push_input(input_jets(p, point));
  for (std::size_t l = 0; l < p.layout.size(); ++l) {
    const LayerBlock& b = p.layout[l];
    tape.push_affine(b.offset, b.rows, b.cols, p.layer_scale(l));
    if (l + 1 < p.layout.size()) tape.push_tanh();
  }
}

/// Network jet at `point` restricted to `mask`, plus the tape that produced it.
/// The tape borrows p.theta.
inline std::pair<SpatialJet<double>, Tape<double>> forward_jet(const MlpParams& p, std::span<const double> point,
                                                               DerivativeMask mask) {
  if (!mask.valid_for(p.d_in())) throw std::invalid_argument("derivative mask not valid for input dimension");
  Tape<double> tape(p.d_in(), p.span());
  record(p, point, tape);
  SpatialJet<double> out = tape.output();
  for (Component c : kAllComponents) {
    if (!mask.contains(c)) out[c] = 0.0;
  }
  return {out, std::move(tape)};
}

inline std::pair<SpatialJet<double>, Tape<double>> forward_jet(const MlpParams& p, std::initializer_list<double> point,
                                                               DerivativeMask mask) {
  std::vector<double> pt(point);
  return forward_jet(p, std::span<const double>(pt), mask);
}

/// Plain network value. Summation order matches the jet path exactly.
inline double evaluate(const MlpParams& p, std::span<const double> point) {
  std::vector<double> a;
  if (p.embedding) {
    const Eigen::VectorXd f = embed(*p.embedding, point);
    a.assign(f.data(), f.data() + f.size());
  } else {
    if (static_cast<int>(point.size()) != p.d_in()) throw std::invalid_argument("point dimension differs from network input");
    a.assign(point.begin(), point.end());
  }
  std::vector<double> z;
  for (std::size_t l = 0; l < p.layout.size(); ++l) {
    const LayerBlock& b = p.layout[l];
    const double s = p.layer_scale(l);
    z.assign(static_cast<std::size_t>(b.rows), 0.0);
    for (int r = 0; r < b.rows; ++r) {
      double acc = 0.0;
      for (int k = 0; k < b.cols; ++k) acc += p.theta[static_cast<Eigen::Index>(b.offset + static_cast<std::size_t>(r) * b.cols + k)] * a[static_cast<std::size_t>(k)];
      if (s != 1.0) acc = acc * s;
      z[static_cast<std::size_t>(r)] = acc + p.theta[static_cast<Eigen::Index>(b.bias_offset() + r)];
    }
    if (l + 1 < p.layout.size()) {
      for (double& v : z) v = std::tanh(v);
    }
    a.swap(z);
  }
  return a.front();
}

inline double evaluate(const MlpParams& p, std::initializer_list<double> point) {
  std::vector<double> pt(point);
  return evaluate(p, std::span<const double>(pt));
}

/// Copy of `p` with parameters replaced by `theta`.
inline MlpParams with_theta(const MlpParams& p, const Eigen::VectorXd& theta) {
  if (theta.size() != p.theta.size()) throw std::invalid_argument("parameter vector length mismatch");
  MlpParams q = p;
  q.theta = theta;
  return q;
}

}  // namespace tangent_kit
