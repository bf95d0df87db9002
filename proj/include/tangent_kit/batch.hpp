#pragma once

// Jet propagation for many points at once.
//
// Activations of a layer are stored as a width x (C * N) matrix whose column
// blocks hold one jet component each for all N points, so every affine layer
// is a single matrix product. This is the path used for training and kernel
// assembly; the per-point Tape is the reference it is tested against.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tangent_kit/jets.hpp"
#include "tangent_kit/net.hpp"
#include "tangent_kit/pde.hpp"

namespace tangent_kit {

/// First and second derivatives of every output component along a parameter
/// direction, one row per active component and one column per point.
struct DirectionalJets {
  Eigen::MatrixXd first;
  Eigen::MatrixXd second;
};

class BatchNetwork {
 public:
  BatchNetwork(const MlpParams& params, const PointSet& points, DerivativeMask mask)
      : p_(params), n_(static_cast<int>(points.rows())) {
    if (points.cols() != params.d_in()) throw std::invalid_argument("batch: point dimension differs from network");
    if (!mask.valid_for(params.d_in())) throw std::invalid_argument("batch: mask not valid for input dimension");
    mask_ = mask.closure();
    comps_ = mask_.components();
    slot_.fill(-1);
    for (std::size_t k = 0; k < comps_.size(); ++k) slot_[index_of(comps_[k])] = static_cast<int>(k);
    forward(points);
  }

  int points() const { return n_; }
  int blocks() const { return static_cast<int>(comps_.size()); }
  const std::vector<Component>& components() const { return comps_; }
  DerivativeMask mask() const { return mask_; }
  bool has(Component c) const { return slot_[index_of(c)] >= 0; }
  int slot(Component c) const { return slot_[index_of(c)]; }

  /// Output component c at every point (zero if c is not active).
  Eigen::VectorXd output(Component c) const {
    if (!has(c)) return Eigen::VectorXd::Zero(n_);
    return out_.row(0).segment(static_cast<Eigen::Index>(slot(c)) * n_, n_).transpose();
  }

  /// Output jet at point i.
  SpatialJet<double> jet(int i) const {
    SpatialJet<double> j;
    j.dim = p_.d_in();
    for (Component c : comps_) j[c] = out_(0, static_cast<Eigen::Index>(slot(c)) * n_ + i);
    return j;
  }

  /// Per-point parameter gradients of sum_c sel(c, i) * output_c(i).
  /// `selectors` is blocks() x N; the result is N x p.
  Eigen::MatrixXd jacobian(const Eigen::MatrixXd& selectors) const {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n_, static_cast<Eigen::Index>(p_.size()));
    sweep(selectors, [&](std::size_t l, const Eigen::MatrixXd& zbar) {
      const LayerBlock& b = p_.layout[l];
      const double s = p_.layer_scale(l);
      const Eigen::MatrixXd& A = acts_[l];
      for (int c = 0; c < blocks(); ++c) {
        const Eigen::MatrixXd At = A.middleCols(static_cast<Eigen::Index>(c) * n_, n_).transpose();
        for (int r = 0; r < b.rows; ++r) {
          const Eigen::ArrayXd w = s * zbar.row(r).segment(static_cast<Eigen::Index>(c) * n_, n_).transpose().array();
          J.middleCols(static_cast<Eigen::Index>(b.offset + static_cast<std::size_t>(r) * b.cols), b.cols).array() +=
              At.array().colwise() * w;
        }
      }
      for (int r = 0; r < b.rows; ++r) {
        J.col(static_cast<Eigen::Index>(b.bias_offset() + r)) += zbar.row(r).head(n_).transpose();
      }
    });
    return J;
  }

  /// Gradient of sum_i sum_c sel(c, i) * output_c(i), without forming J.
  Eigen::VectorXd gradient(const Eigen::MatrixXd& selectors) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p_.size()));
    sweep(selectors, [&](std::size_t l, const Eigen::MatrixXd& zbar) {
      const LayerBlock& b = p_.layout[l];
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> gw = zbar * acts_[l].transpose();
      gw *= p_.layer_scale(l);
      g.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.weight_count())) =
          Eigen::Map<const Eigen::VectorXd>(gw.data(), static_cast<Eigen::Index>(b.weight_count()));
      g.segment(static_cast<Eigen::Index>(b.bias_offset()), b.rows) = zbar.leftCols(n_).rowwise().sum();
    });
    return g;
  }

  /// Derivatives of the output jets along parameter direction v, to second
  /// order, by propagating a truncated Taylor expansion in the step size.
  DirectionalJets directional(const Eigen::VectorXd& v) const {
    if (v.size() != static_cast<Eigen::Index>(p_.size())) throw std::invalid_argument("batch: direction length mismatch");
    const Eigen::Index cn = static_cast<Eigen::Index>(blocks()) * n_;
    Eigen::MatrixXd A1 = Eigen::MatrixXd::Zero(acts_[0].rows(), cn);
    Eigen::MatrixXd A2 = Eigen::MatrixXd::Zero(acts_[0].rows(), cn);
    Eigen::MatrixXd Z1, Z2;
    for (std::size_t l = 0; l < p_.layout.size(); ++l) {
      const LayerBlock& b = p_.layout[l];
      const double s = p_.layer_scale(l);
      const auto W = p_.weight(l);
      const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> V(
          v.data() + b.offset, b.rows, b.cols);
      const Eigen::Map<const Eigen::VectorXd> db(v.data() + b.bias_offset(), b.rows);
      Z1.noalias() = W * A1;
      Z1.noalias() += V * acts_[l];
      Z1 *= s;
      Z1.leftCols(n_).colwise() += db;
      Z2.noalias() = W * A2;
      Z2.noalias() += 2.0 * (V * A1);
      Z2 *= s;
      if (l + 1 == p_.layout.size()) break;
      A1.resize(b.rows, cn);
      A2.resize(b.rows, cn);
      tanh_taylor(l, Z1, Z2, A1, A2);
    }
    return {reshape(Z1), reshape(Z2)};
  }

 private:
  void forward(const PointSet& points) {
    const int C = blocks();
    const Eigen::Index cn = static_cast<Eigen::Index>(C) * n_;
    const int in_w = p_.layout.front().cols;
    Eigen::MatrixXd A0 = Eigen::MatrixXd::Zero(in_w, cn);
    for (int i = 0; i < n_; ++i) {
      const auto jets = input_jets(p_, row_span(points, i));
      for (int k = 0; k < in_w; ++k) {
        for (int c = 0; c < C; ++c) A0(k, static_cast<Eigen::Index>(c) * n_ + i) = jets[static_cast<std::size_t>(k)][comps_[static_cast<std::size_t>(c)]];
      }
    }
    acts_.push_back(std::move(A0));
    for (std::size_t l = 0; l < p_.layout.size(); ++l) {
      const double s = p_.layer_scale(l);
      Eigen::MatrixXd Z;
      Z.noalias() = p_.weight(l) * acts_[l];
      if (s != 1.0) Z *= s;
      Z.leftCols(n_).colwise() += p_.bias(l);
      if (l + 1 == p_.layout.size()) {
        out_ = std::move(Z);
        break;
      }
      acts_.push_back(tanh_forward(Z));
      pre_.push_back(std::move(Z));
    }
  }

  Eigen::Index off(Component c) const { return static_cast<Eigen::Index>(slot(c)) * n_; }

  Eigen::MatrixXd tanh_forward(const Eigen::MatrixXd& Z) {
    const Eigen::Index rows = Z.rows();
    Eigen::MatrixXd A(rows, Z.cols());
    Eigen::ArrayXXd T = Z.leftCols(n_).array().unaryExpr([](double x) { return std::tanh(x); });
    Eigen::ArrayXXd S1 = 1.0 - T * T;
    Eigen::ArrayXXd S2 = -2.0 * T * S1;
    A.leftCols(n_) = T.matrix();
    const int d = p_.d_in();
    for (int i = 0; i < d; ++i) {
      const Component gi = i == 0 ? Component::d0 : Component::d1;
      if (!has(gi)) continue;
      A.middleCols(off(gi), n_) = (S1 * Z.middleCols(off(gi), n_).array()).matrix();
    }
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        const Component h = hess_component(i, j);
        if (!has(h)) continue;
        const auto gi = Z.middleCols(off(grad_component(i)), n_).array();
        const auto gj = Z.middleCols(off(grad_component(j)), n_).array();
        A.middleCols(off(h), n_) = (S2 * gi * gj + S1 * Z.middleCols(off(h), n_).array()).matrix();
      }
    }
    tanh_.push_back(std::move(T));
    return A;
  }

  static Component grad_component(int i) { return i == 0 ? Component::d0 : Component::d1; }
  static Component hess_component(int i, int j) {
    return i == j ? (i == 0 ? Component::d00 : Component::d11) : Component::d01;
  }

  // Adjoint of the tanh layer with pre-activation Z given output adjoint Abar.
  Eigen::MatrixXd tanh_adjoint(std::size_t l, const Eigen::MatrixXd& Abar) const {
    const Eigen::MatrixXd& Z = pre_[l];
    const Eigen::ArrayXXd& T = tanh_[l];
    const Eigen::ArrayXXd S1 = 1.0 - T * T;
    const Eigen::ArrayXXd S2 = -2.0 * T * S1;
    const int d = p_.d_in();
    Eigen::MatrixXd Zbar(Z.rows(), Z.cols());
    Eigen::ArrayXXd zv = Abar.leftCols(n_).array() * S1;
    bool any_hess = false;
    for (int i = 0; i < d; ++i) {
      const Component gi = grad_component(i);
      if (!has(gi)) continue;
      zv += Abar.middleCols(off(gi), n_).array() * S2 * Z.middleCols(off(gi), n_).array();
      Zbar.middleCols(off(gi), n_) = (Abar.middleCols(off(gi), n_).array() * S1).matrix();
    }
    for (int i = 0; i < d && !any_hess; ++i) {
      for (int j = i; j < d; ++j) any_hess = any_hess || has(hess_component(i, j));
    }
    if (any_hess) {
      const Eigen::ArrayXXd S3 = -2.0 * S1 * S1 + 4.0 * T * T * S1;
      for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
          const Component h = hess_component(i, j);
          if (!has(h)) continue;
          const auto ah = Abar.middleCols(off(h), n_).array();
          const auto gi = Z.middleCols(off(grad_component(i)), n_).array();
          const auto gj = Z.middleCols(off(grad_component(j)), n_).array();
          zv += ah * (S3 * gi * gj + S2 * Z.middleCols(off(h), n_).array());
          const Eigen::ArrayXXd c = ah * S2;
          if (i == j) {
            Zbar.middleCols(off(grad_component(i)), n_).array() += 2.0 * c * gi;
          } else {
            Zbar.middleCols(off(grad_component(i)), n_).array() += c * gj;
            Zbar.middleCols(off(grad_component(j)), n_).array() += c * gi;
          }
          Zbar.middleCols(off(h), n_) = (ah * S1).matrix();
        }
      }
    }
    Zbar.leftCols(n_) = zv.matrix();
    return Zbar;
  }

  // Reverse pass; calls visit(layer, pre-activation adjoint) from the output
  // layer down to the first.
  template <class Visit>
  void sweep(const Eigen::MatrixXd& selectors, Visit&& visit) const {
    if (selectors.rows() != blocks() || selectors.cols() != n_) {
      throw std::invalid_argument("batch: selector matrix must be blocks x points");
    }
    const Eigen::Index cn = static_cast<Eigen::Index>(blocks()) * n_;
    Eigen::MatrixXd zbar(1, cn);
    for (int c = 0; c < blocks(); ++c) zbar.block(0, static_cast<Eigen::Index>(c) * n_, 1, n_) = selectors.row(c);
    for (std::size_t l = p_.layout.size(); l-- > 0;) {
      visit(l, zbar);
      if (l == 0) break;
      Eigen::MatrixXd abar;
      abar.noalias() = p_.weight(l).transpose() * zbar;
      const double s = p_.layer_scale(l);
      if (s != 1.0) abar *= s;
      zbar = tanh_adjoint(l - 1, abar);
    }
  }

  // Pushes first and second directional derivatives (Z1, Z2) through tanh of
  // hidden layer l, component by component of the spatial jet:
  //   a = s(u), a_i = s'(u) z_i, a_ij = s''(u) z_i z_j + s'(u) z_ij,
  // each a product of functions of the direction parameter.
  void tanh_taylor(std::size_t l, const Eigen::MatrixXd& Z1, const Eigen::MatrixXd& Z2, Eigen::MatrixXd& A1,
                   Eigen::MatrixXd& A2) const {
    using Arr = Eigen::ArrayXXd;
    struct T2 {
      Arr v, d1, d2;
    };
    const Eigen::MatrixXd& Z0 = pre_[l];
    auto get = [&](Component c) {
      const Eigen::Index o = off(c);
      return T2{Z0.middleCols(o, n_).array(), Z1.middleCols(o, n_).array(), Z2.middleCols(o, n_).array()};
    };
    auto mul = [](const T2& f, const T2& g) {
      return T2{f.v * g.v, f.d1 * g.v + f.v * g.d1, f.d2 * g.v + 2.0 * f.d1 * g.d1 + f.v * g.d2};
    };
    auto put = [&](Component c, const T2& t) {
      A1.middleCols(off(c), n_) = t.d1.matrix();
      A2.middleCols(off(c), n_) = t.d2.matrix();
    };
    const T2 u = get(Component::value);
    const Arr& s0 = tanh_[l];
    const Arr s1 = 1.0 - s0 * s0;
    const Arr s2 = -2.0 * s0 * s1;
    const Arr s3 = -2.0 * (s1 * s1 + s0 * s2);
    // k-th derivative of tanh composed with u, as a function of the direction
    auto outer = [&](const Arr& a, const Arr& b, const Arr& c) { return T2{a, b * u.d1, c * u.d1.square() + b * u.d2}; };
    put(Component::value, outer(s0, s1, s2));
    const int d = p_.d_in();
    bool any_grad = false, any_hess = false;
    for (int i = 0; i < d; ++i) {
      any_grad = any_grad || has(grad_component(i));
      for (int j = i; j < d; ++j) any_hess = any_hess || has(hess_component(i, j));
    }
    if (!any_grad) return;
    const T2 g1 = outer(s1, s2, s3);
    for (int i = 0; i < d; ++i) {
      if (has(grad_component(i))) put(grad_component(i), mul(g1, get(grad_component(i))));
    }
    if (!any_hess) return;
    const Arr s4 = -2.0 * (3.0 * s1 * s2 + s0 * s3);
    const T2 g2 = outer(s2, s3, s4);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        const Component h = hess_component(i, j);
        if (!has(h)) continue;
        const T2 a = mul(mul(g2, get(grad_component(i))), get(grad_component(j)));
        const T2 b = mul(g1, get(h));
        put(h, T2{a.v + b.v, a.d1 + b.d1, a.d2 + b.d2});
      }
    }
  }

  Eigen::MatrixXd reshape(const Eigen::MatrixXd& row) const {
    Eigen::MatrixXd out(blocks(), n_);
    for (int c = 0; c < blocks(); ++c) out.row(c) = row.block(0, static_cast<Eigen::Index>(c) * n_, 1, n_);
    return out;
  }

  const MlpParams& p_;
  int n_ = 0;
  DerivativeMask mask_;
  std::vector<Component> comps_;
  std::array<int, kComponents> slot_{};
  std::vector<Eigen::MatrixXd> acts_;  // input activation of each layer
  std::vector<Eigen::MatrixXd> pre_;   // pre-activation of each hidden layer
  std::vector<Eigen::ArrayXXd> tanh_;  // tanh of the value block of each hidden layer
  Eigen::MatrixXd out_;
};

/// Network values at many points.
inline Eigen::VectorXd evaluate_batch(const MlpParams& params, const PointSet& points) {
  return BatchNetwork(params, points, DerivativeMask::value_only()).output(Component::value);
}

}  // namespace tangent_kit
