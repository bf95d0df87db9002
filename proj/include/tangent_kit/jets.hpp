#pragma once

// Second-order spatial jets and a recording tape over them.
//
// A SpatialJet carries u, its spatial gradient and the upper triangle of its
// spatial Hessian at one point, for inputs of dimension one or two. The Tape
// records one network evaluation at one point layer by layer; reverse_sweep
// turns it into parameter gradients of any weighted combination of output
// jet components, and hessian_vector differentiates that sweep once more in
// forward mode.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "tangent_kit/scalar.hpp"

namespace tangent_kit {

inline constexpr int kMaxDim = 2;
inline constexpr int kComponents = 6;

/// Jet components in storage order. Coordinate 0 is `x`, coordinate 1 is `t`.
enum class Component : std::uint8_t { value = 0, d0 = 1, d1 = 2, d00 = 3, d01 = 4, d11 = 5 };

inline constexpr std::array<Component, kComponents> kAllComponents{
    Component::value, Component::d0, Component::d1, Component::d00, Component::d01, Component::d11};

constexpr int index_of(Component c) { return static_cast<int>(c); }

/// Position of (i, j), i <= j, inside the packed upper triangle.
constexpr int hess_index(int i, int j) { return i == j ? (i == 0 ? 0 : 2) : 1; }

constexpr int derivative_order(Component c) {
  switch (c) {
    case Component::value: return 0;
    case Component::d0:
    case Component::d1: return 1;
    default: return 2;
  }
}

constexpr bool component_valid_for(Component c, int dim) {
  if (dim == 2) return true;
  return c == Component::value || c == Component::d0 || c == Component::d00;
}

inline std::string component_name(Component c) {
  switch (c) {
    case Component::value: return "u";
    case Component::d0: return "u_x";
    case Component::d1: return "u_t";
    case Component::d00: return "u_xx";
    case Component::d01: return "u_xt";
    case Component::d11: return "u_tt";
  }
  return "?";
}

inline Component parse_component(std::string_view name) {
  for (Component c : kAllComponents) {
    if (component_name(c) == name) return c;
  }
  if (name == "u_tx") return Component::d01;
  if (name.size() > 2 && name.substr(0, 2) == "u_" && name.size() - 2 > 2) {
    throw std::invalid_argument("derivative '" + std::string(name) + "' has order above 2");
  }
  throw std::invalid_argument("unknown jet component '" + std::string(name) + "'");
}

/// Set of jet components an evaluation must produce.
class DerivativeMask {
 public:
  constexpr DerivativeMask() = default;

  static constexpr DerivativeMask value_only() { return of({Component::value}); }

  static constexpr DerivativeMask of(std::initializer_list<Component> comps) {
    DerivativeMask m;
    for (Component c : comps) m.bits_ |= static_cast<std::uint8_t>(1u << index_of(c));
    return m;
  }

  /// Build from multi-indices given as lists of coordinates to differentiate,
  /// e.g. {} for u, {0} for u_x, {0, 1} for u_xt.
  static DerivativeMask from_multi_indices(const std::vector<std::vector<int>>& indices, int dim) {
    DerivativeMask m;
    for (const auto& idx : indices) {
      if (idx.size() > 2) throw std::invalid_argument("derivative order above 2 is not supported");
      for (int c : idx) {
        if (c < 0 || c >= dim) throw std::out_of_range("derivative coordinate out of range");
      }
      Component comp = Component::value;
      if (idx.size() == 1) comp = idx[0] == 0 ? Component::d0 : Component::d1;
      if (idx.size() == 2) {
        const int a = std::min(idx[0], idx[1]);
        const int b = std::max(idx[0], idx[1]);
        comp = a == 0 ? (b == 0 ? Component::d00 : Component::d01) : Component::d11;
      }
      m.set(comp);
    }
    return m;
  }

  constexpr void set(Component c) { bits_ |= static_cast<std::uint8_t>(1u << index_of(c)); }
  constexpr bool contains(Component c) const { return (bits_ >> index_of(c)) & 1u; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }

  constexpr bool subset_of(const DerivativeMask& other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr DerivativeMask operator|(const DerivativeMask& o) const {
    DerivativeMask m;
    m.bits_ = bits_ | o.bits_;
    return m;
  }
  constexpr bool operator==(const DerivativeMask&) const = default;

  /// The mask plus everything needed to propagate it: u itself and the first
  /// derivatives entering each requested second derivative.
  constexpr DerivativeMask closure() const {
    DerivativeMask m = *this;
    m.set(Component::value);
    if (contains(Component::d00)) m.set(Component::d0);
    if (contains(Component::d11)) m.set(Component::d1);
    if (contains(Component::d01)) {
      m.set(Component::d0);
      m.set(Component::d1);
    }
    return m;
  }

  bool valid_for(int dim) const {
    for (Component c : kAllComponents) {
      if (contains(c) && !component_valid_for(c, dim)) return false;
    }
    return true;
  }

  std::vector<Component> components() const {
    std::vector<Component> out;
    for (Component c : kAllComponents) {
      if (contains(c)) out.push_back(c);
    }
    return out;
  }

  int count() const { return static_cast<int>(components().size()); }

 private:
  std::uint8_t bits_ = 0;
};

/// Value, gradient and packed upper-triangular Hessian of a scalar field at a
/// point. Components beyond `dim` stay zero.
template <class T = double>
struct SpatialJet {
  T value{};
  std::array<T, kMaxDim> grad{};
  std::array<T, 3> hess{};  // (00, 01, 11)
  int dim = 1;

  T& operator[](Component c) {
    switch (c) {
      case Component::value: return value;
      case Component::d0: return grad[0];
      case Component::d1: return grad[1];
      case Component::d00: return hess[0];
      case Component::d01: return hess[1];
      case Component::d11: return hess[2];
    }
    return value;
  }
  const T& operator[](Component c) const { return const_cast<SpatialJet&>(*this)[c]; }
};

template <class T>
using ComponentWeights = std::array<T, kComponents>;

/// Weighted combination of jet components selected for differentiation.
using ComponentSelector = ComponentWeights<double>;

inline ComponentSelector select(Component c, double weight = 1.0) {
  ComponentSelector s{};
  s[index_of(c)] = weight;
  return s;
}

template <class T>
SpatialJet<T> promote(const SpatialJet<double>& j) {
  SpatialJet<T> out;
  out.dim = j.dim;
  out.value = T(j.value);
  for (int i = 0; i < kMaxDim; ++i) out.grad[i] = T(j.grad[i]);
  for (int i = 0; i < 3; ++i) out.hess[i] = T(j.hess[i]);
  return out;
}

/// Jet of the coordinate function x_i at `point`.
inline SpatialJet<double> seed_input(std::span<const double> point, int coord_index) {
  const int dim = static_cast<int>(point.size());
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("seed_input: point dimension must be 1 or 2");
  if (coord_index < 0 || coord_index >= dim) throw std::out_of_range("seed_input: coordinate index out of range");
  SpatialJet<double> j;
  j.dim = dim;
  j.value = point[static_cast<std::size_t>(coord_index)];
  j.grad[static_cast<std::size_t>(coord_index)] = 1.0;
  return j;
}

/// scale * sum_i w_i * jet_i + bias, with the bias entering the value only.
template <class T>
SpatialJet<T> jet_affine(std::span<const SpatialJet<T>> jets, std::span<const T> weights, const T& bias,
                         double scale = 1.0) {
  if (jets.size() != weights.size()) throw std::invalid_argument("jet_affine: jets and weights differ in length");
  SpatialJet<T> out;
  out.dim = jets.empty() ? 1 : jets.front().dim;
  for (std::size_t k = 0; k < jets.size(); ++k) {
    const T& w = weights[k];
    const SpatialJet<T>& a = jets[k];
    out.value += w * a.value;
    for (int i = 0; i < out.dim; ++i) out.grad[i] += w * a.grad[i];
    for (int h = 0; h < 3; ++h) out.hess[h] += w * a.hess[h];
  }
  if (scale != 1.0) {
    out.value = out.value * scale;
    for (int i = 0; i < out.dim; ++i) out.grad[i] = out.grad[i] * scale;
    for (int h = 0; h < 3; ++h) out.hess[h] = out.hess[h] * scale;
  }
  out.value += bias;
  return out;
}

inline SpatialJet<double> jet_affine(std::span<const SpatialJet<double>> jets, std::span<const double> weights,
                                     double bias) {
  return jet_affine<double>(jets, weights, bias, 1.0);
}

/// tanh applied to a jet, chain rule to second order.
template <class T>
SpatialJet<T> jet_tanh(const SpatialJet<T>& z) {
  using std::tanh;
  const T t = tanh(z.value);
  const T s1 = 1.0 - t * t;
  const T s2 = -2.0 * t * s1;
  SpatialJet<T> out;
  out.dim = z.dim;
  out.value = t;
  for (int i = 0; i < z.dim; ++i) out.grad[i] = s1 * z.grad[i];
  for (int i = 0; i < z.dim; ++i) {
    for (int j = i; j < z.dim; ++j) {
      const int h = hess_index(i, j);
      out.hess[h] = s2 * z.grad[i] * z.grad[j] + s1 * z.hess[h];
    }
  }
  return out;
}

/// Product of two jets (Leibniz rule to second order).
template <class T>
SpatialJet<T> jet_mul(const SpatialJet<T>& a, const SpatialJet<T>& b) {
  SpatialJet<T> out;
  out.dim = std::max(a.dim, b.dim);
  out.value = a.value * b.value;
  for (int i = 0; i < out.dim; ++i) out.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
  for (int i = 0; i < out.dim; ++i) {
    for (int j = i; j < out.dim; ++j) {
      const int h = hess_index(i, j);
      out.hess[h] = a.hess[h] * b.value + a.grad[i] * b.grad[j] + a.grad[j] * b.grad[i] + a.value * b.hess[h];
    }
  }
  return out;
}

template <class T>
SpatialJet<T> jet_add(const SpatialJet<T>& a, const SpatialJet<T>& b) {
  SpatialJet<T> out = a;
  out.dim = std::max(a.dim, b.dim);
  out.value += b.value;
  for (int i = 0; i < kMaxDim; ++i) out.grad[i] += b.grad[i];
  for (int h = 0; h < 3; ++h) out.hess[h] += b.hess[h];
  return out;
}

template <class T>
SpatialJet<T> jet_scale(const SpatialJet<T>& a, double s) {
  SpatialJet<T> out = a;
  out.value = out.value * s;
  for (auto& g : out.grad) g = g * s;
  for (auto& h : out.hess) h = h * s;
  return out;
}

/// Adjoint of jet_tanh: given the output adjoint `abar` at pre-activation `z`,
/// returns the pre-activation adjoint.
template <class T>
SpatialJet<T> jet_tanh_adjoint(const SpatialJet<T>& z, const SpatialJet<T>& abar) {
  using std::tanh;
  const T t = tanh(z.value);
  const T s1 = 1.0 - t * t;
  const T s2 = -2.0 * t * s1;
  const T s3 = -2.0 * s1 * s1 + 4.0 * t * t * s1;
  SpatialJet<T> zbar;
  zbar.dim = z.dim;
  T zv = abar.value * s1;
  for (int i = 0; i < z.dim; ++i) {
    zv += abar.grad[i] * s2 * z.grad[i];
    zbar.grad[i] = abar.grad[i] * s1;
  }
  for (int i = 0; i < z.dim; ++i) {
    for (int j = i; j < z.dim; ++j) {
      const int h = hess_index(i, j);
      zv += abar.hess[h] * (s3 * z.grad[i] * z.grad[j] + s2 * z.hess[h]);
      const T c = abar.hess[h] * s2;
      if (i == j) {
        zbar.grad[i] += 2.0 * c * z.grad[i];
      } else {
        zbar.grad[i] += c * z.grad[j];
        zbar.grad[j] += c * z.grad[i];
      }
      zbar.hess[h] = abar.hess[h] * s1;
    }
  }
  zbar.value = zv;
  return zbar;
}

enum class NodeKind : std::uint8_t { input, affine, tanh };

template <class T>
struct TapeNode {
  NodeKind kind = NodeKind::input;
  int operand = -1;
  std::vector<SpatialJet<T>> jets;
  // affine only: W is rows x cols row-major at param_offset, bias follows it.
  std::size_t param_offset = 0;
  int rows = 0;
  int cols = 0;
  double scale = 1.0;
};

struct ParamSlot {
  int node = 0;
  std::size_t offset = 0;
  std::size_t count = 0;
};

/// Layer-granular record of one network evaluation at one point.
///
/// The tape references the flat parameter vector it was recorded with; that
/// vector must outlive the tape. Tapes over Dual or Taylor2 additionally carry
/// the parameter direction, and read parameter k as (theta_k, v_k).
template <class T>
class Tape {
 public:
  Tape(int dim, std::span<const double> theta, std::vector<double> direction = {})
      : dim_(dim), theta_(theta), direction_(std::move(direction)) {
    if (!direction_.empty() && direction_.size() != theta_.size()) {
      throw std::invalid_argument("Tape: direction length differs from parameter count");
    }
  }

  int dim() const { return dim_; }
  std::size_t param_count() const { return theta_.size(); }
  std::span<const double> theta() const { return theta_; }
  std::span<const double> direction() const { return direction_; }
  const std::vector<TapeNode<T>>& nodes() const { return nodes_; }
  bool empty() const { return nodes_.empty(); }

  T param(std::size_t k) const {
    if constexpr (std::is_same_v<T, double>) {
      return theta_[k];
    } else if constexpr (std::is_same_v<T, Dual>) {
      return Dual(theta_[k], direction_.empty() ? 0.0 : direction_[k]);
    } else {
      return Taylor2(theta_[k], direction_.empty() ? 0.0 : direction_[k], 0.0);
    }
  }

  int push_input(const std::vector<SpatialJet<double>>& jets) {
    TapeNode<T> node;
    node.kind = NodeKind::input;
    node.jets.reserve(jets.size());
    for (const auto& j : jets) node.jets.push_back(promote<T>(j));
    source_ = jets;
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int push_affine(std::size_t param_offset, int rows, int cols, double scale) {
    const auto& in = back_jets();
    if (static_cast<int>(in.size()) != cols) throw std::invalid_argument("Tape: affine width mismatch");
    if (param_offset + static_cast<std::size_t>(rows) * cols + rows > theta_.size()) {
      throw std::out_of_range("Tape: affine block exceeds parameter vector");
    }
    TapeNode<T> node;
    node.kind = NodeKind::affine;
    node.operand = static_cast<int>(nodes_.size()) - 1;
    node.param_offset = param_offset;
    node.rows = rows;
    node.cols = cols;
    node.scale = scale;
    node.jets.resize(static_cast<std::size_t>(rows));
    std::vector<T> w(static_cast<std::size_t>(cols));
    const std::size_t bias_offset = param_offset + static_cast<std::size_t>(rows) * cols;
    for (int r = 0; r < rows; ++r) {
      for (int k = 0; k < cols; ++k) w[k] = param(param_offset + static_cast<std::size_t>(r) * cols + k);
      node.jets[r] = jet_affine<T>(std::span<const SpatialJet<T>>(in), std::span<const T>(w),
                                   param(bias_offset + r), scale);
      node.jets[r].dim = dim_;
    }
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int push_tanh() {
    const auto& in = back_jets();
    TapeNode<T> node;
    node.kind = NodeKind::tanh;
    node.operand = static_cast<int>(nodes_.size()) - 1;
    node.jets.reserve(in.size());
    for (const auto& z : in) node.jets.push_back(jet_tanh(z));
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const SpatialJet<T>& output() const {
    if (nodes_.empty() || nodes_.back().jets.size() != 1) throw std::logic_error("Tape: no scalar output recorded");
    return nodes_.back().jets.front();
  }

  /// Flat parameter ranges owned by each affine node.
  std::vector<ParamSlot> param_slots() const {
    std::vector<ParamSlot> out;
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      const auto& node = nodes_[n];
      if (node.kind != NodeKind::affine) continue;
      out.push_back({static_cast<int>(n), node.param_offset,
                     static_cast<std::size_t>(node.rows) * node.cols + static_cast<std::size_t>(node.rows)});
    }
    return out;
  }

  /// Re-records the same evaluation with parameters (theta, direction) in a
  /// forward-mode scalar type.
  template <class U>
  Tape<U> replay(std::span<const double> direction) const {
    Tape<U> out(dim_, theta_, std::vector<double>(direction.begin(), direction.end()));
    for (const auto& node : nodes_) {
      switch (node.kind) {
        case NodeKind::input: out.push_input(source_); break;
        case NodeKind::affine: out.push_affine(node.param_offset, node.rows, node.cols, node.scale); break;
        case NodeKind::tanh: out.push_tanh(); break;
      }
    }
    return out;
  }

 private:
  const std::vector<SpatialJet<T>>& back_jets() const {
    if (nodes_.empty()) throw std::logic_error("Tape: no input recorded");
    return nodes_.back().jets;
  }

  int dim_ = 1;
  std::span<const double> theta_;
  std::vector<double> direction_;
  std::vector<SpatialJet<double>> source_;
  std::vector<TapeNode<T>> nodes_;
};

/// Gradient with respect to every parameter of sum_c selector_c * output_c.
template <class T>
std::vector<T> reverse_sweep(const Tape<T>& tape, const ComponentWeights<T>& selector) {
  if (tape.empty()) throw std::invalid_argument("reverse_sweep: empty tape");
  const auto& nodes = tape.nodes();
  std::vector<T> grad(tape.param_count(), T{});

  std::vector<SpatialJet<T>> adj(nodes.back().jets.size());
  if (adj.size() != 1) throw std::invalid_argument("reverse_sweep: tape output is not scalar");
  adj[0].dim = tape.dim();
  for (Component c : kAllComponents) adj[0][c] = selector[index_of(c)];

  for (std::size_t n = nodes.size() - 1; n > 0; --n) {
    const TapeNode<T>& node = nodes[n];
    const auto& in = nodes[static_cast<std::size_t>(node.operand)].jets;
    std::vector<SpatialJet<T>> adj_in(in.size());
    for (auto& a : adj_in) a.dim = tape.dim();
    switch (node.kind) {
      case NodeKind::affine: {
        const std::size_t bias_offset = node.param_offset + static_cast<std::size_t>(node.rows) * node.cols;
        for (int r = 0; r < node.rows; ++r) {
          const SpatialJet<T>& zb = adj[static_cast<std::size_t>(r)];
          grad[bias_offset + r] += zb.value;
          for (int k = 0; k < node.cols; ++k) {
            const std::size_t widx = node.param_offset + static_cast<std::size_t>(r) * node.cols + k;
            const SpatialJet<T>& a = in[static_cast<std::size_t>(k)];
            T gw = zb.value * a.value;
            for (int i = 0; i < tape.dim(); ++i) gw += zb.grad[i] * a.grad[i];
            for (int h = 0; h < 3; ++h) gw += zb.hess[h] * a.hess[h];
            grad[widx] += gw * node.scale;
            const T w = tape.param(widx) * node.scale;
            SpatialJet<T>& ab = adj_in[static_cast<std::size_t>(k)];
            ab.value += w * zb.value;
            for (int i = 0; i < tape.dim(); ++i) ab.grad[i] += w * zb.grad[i];
            for (int h = 0; h < 3; ++h) ab.hess[h] += w * zb.hess[h];
          }
        }
        break;
      }
      case NodeKind::tanh:
        for (std::size_t u = 0; u < in.size(); ++u) adj_in[u] = jet_tanh_adjoint(in[u], adj[u]);
        break;
      case NodeKind::input: break;
    }
    adj = std::move(adj_in);
  }
  return grad;
}

inline Eigen::VectorXd reverse_sweep(const Tape<double>& tape, const ComponentSelector& selector) {
  const std::vector<double> g = reverse_sweep<double>(tape, selector);
  return Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
}

/// H v for the parameter Hessian H of sum_c selector_c * output_c, computed
/// by differentiating the reverse sweep along v in forward mode.
inline Eigen::VectorXd hessian_vector(const Tape<double>& tape, const ComponentSelector& selector,
                                      std::span<const double> v) {
  if (tape.empty()) throw std::invalid_argument("hessian_vector: empty tape");
  if (v.size() != tape.param_count()) throw std::invalid_argument("hessian_vector: direction has wrong length");
  const Tape<Dual> dual = tape.replay<Dual>(v);
  ComponentWeights<Dual> sel{};
  for (int c = 0; c < kComponents; ++c) sel[c] = Dual(selector[c]);
  const std::vector<Dual> g = reverse_sweep<Dual>(dual, sel);
  Eigen::VectorXd out(static_cast<Eigen::Index>(g.size()));
  for (std::size_t k = 0; k < g.size(); ++k) out[static_cast<Eigen::Index>(k)] = g[k].d;
  return out;
}

inline Eigen::VectorXd hessian_vector(const Tape<double>& tape, const ComponentSelector& selector,
                                      const Eigen::VectorXd& v) {
  return hessian_vector(tape, selector, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

}  // namespace tangent_kit
