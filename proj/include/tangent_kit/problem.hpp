#pragma once

// A PINN as a nonlinear least-squares problem in the flat parameter vector.
//
// Optimizers are written against the small interface below (residuals,
// linearize, loss_and_gradient, second_directional, loss_terms,
// relative_l2), which test problems implement as well.

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tangent_kit/batch.hpp"
#include "tangent_kit/net.hpp"
#include "tangent_kit/pde.hpp"

namespace tangent_kit {

struct Linearization {
  Eigen::VectorXd rho;
  Eigen::MatrixXd J;
};

class PinnProblem {
 public:
  PinnProblem(MlpParams net, ResidualSpec spec, CollocationSet data, std::optional<EvalGrid> grid = std::nullopt)
      : net_(std::move(net)), spec_(std::move(spec)), data_(std::move(data)), grid_(std::move(grid)) {
    if (net_.d_in() != spec_.d_in) throw std::invalid_argument("network input dimension differs from pde");
    if (data_.residual.cols() != spec_.d_in) throw std::invalid_argument("collocation dimension differs from pde");
    mask_ = spec_.evaluation_mask();
    const int nb = data_.n_b_rows();
    const int nr = data_.n_r();
    int pairs = 0;
    for (const auto& row : data_.boundary) pairs += row.paired ? 1 : 0;
    points_.resize(nb + nr + pairs, spec_.d_in);
    int next_pair = nb + nr;
    for (int i = 0; i < nb; ++i) {
      const BoundaryRow& row = data_.boundary[static_cast<std::size_t>(i)];
      for (int a = 0; a < spec_.d_in; ++a) points_(i, a) = row.point[static_cast<std::size_t>(a)];
      if (row.paired) {
        for (int a = 0; a < spec_.d_in; ++a) points_(next_pair, a) = row.pair_point[static_cast<std::size_t>(a)];
        pair_of_.push_back({i, next_pair});
        ++next_pair;
      }
    }
    points_.middleRows(nb, nr) = data_.residual;
    forcing_.resize(nr);
    for (int i = 0; i < nr; ++i) forcing_[i] = spec_.forcing(row_span(data_.residual, i));
    sb_ = 1.0 / std::sqrt(static_cast<double>(data_.n_b()));
    sr_ = 1.0 / std::sqrt(static_cast<double>(nr));
  }

  const MlpParams& net() const { return net_; }
  const ResidualSpec& spec() const { return spec_; }
  const CollocationSet& data() const { return data_; }
  const std::optional<EvalGrid>& grid() const { return grid_; }
  const PointSet& points() const { return points_; }
  std::size_t size() const { return net_.size(); }
  int rows() const { return data_.rows(); }
  int boundary_rows() const { return data_.n_b_rows(); }

  MlpParams at(const Eigen::VectorXd& theta) const { return with_theta(net_, theta); }

  Eigen::VectorXd residuals(const Eigen::VectorXd& theta, bool scaled = true) const {
    const MlpParams p = at(theta);
    const BatchNetwork b(p, points_, mask_);
    return stack(b, scaled);
  }

  double loss(const Eigen::VectorXd& theta) const { return 0.5 * residuals(theta).squaredNorm(); }

  LossTerms loss_terms(const Eigen::VectorXd& theta) const { return terms(residuals(theta)); }

  LossTerms terms(const Eigen::VectorXd& rho) const {
    LossTerms t;
    t.boundary = 0.5 * rho.head(boundary_rows()).squaredNorm();
    t.residual = 0.5 * rho.tail(data_.n_r()).squaredNorm();
    t.total = t.boundary + t.residual;
    return t;
  }

  /// Residuals and their Jacobian. With scaled = false the 1/sqrt(N) row
  /// weights are dropped (the kernel convention).
  Linearization linearize(const Eigen::VectorXd& theta, bool scaled = true) const {
    const MlpParams p = at(theta);
    const BatchNetwork b(p, points_, mask_);
    Linearization out;
    out.rho = stack(b, scaled);
    out.J = fold(b.jacobian(selectors(b, scaled, nullptr)));
    return out;
  }

  std::pair<double, Eigen::VectorXd> loss_and_gradient(const Eigen::VectorXd& theta) const {
    const MlpParams p = at(theta);
    const BatchNetwork b(p, points_, mask_);
    const Eigen::VectorXd rho = stack(b, true);
    return {0.5 * rho.squaredNorm(), b.gradient(selectors(b, true, &rho))};
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const { return loss_and_gradient(theta).second; }

  /// w_i = d^2/dt^2 rho_i(theta + t v) at t = 0.
  Eigen::VectorXd second_directional(const Eigen::VectorXd& theta, const Eigen::VectorXd& v, bool scaled = true) const {
    const MlpParams p = at(theta);
    const BatchNetwork b(p, points_, mask_);
    const DirectionalJets dj = b.directional(v);
    const int nb = boundary_rows();
    const double sb = scaled ? sb_ : 1.0;
    const double sr = scaled ? sr_ : 1.0;
    Eigen::VectorXd w(rows());
    for (int i = 0; i < nb; ++i) {
      const BoundaryRow& row = data_.boundary[static_cast<std::size_t>(i)];
      w[i] = row.coef * dj.second(b.slot(row.component), i);
    }
    for (const auto& [row, pt] : pair_of_) {
      const BoundaryRow& br = data_.boundary[static_cast<std::size_t>(row)];
      w[row] += br.pair_coef * dj.second(b.slot(br.component), pt);
    }
    w.head(nb) *= sb;
    const auto& Q = spec_.Q;
    for (int j = 0; j < data_.n_r(); ++j) {
      const int pt = nb + j;
      ComponentWeights<double> z1{}, z2{};
      const ComponentWeights<double> z0 = phi_of(b.jet(pt));
      for (Component c : b.components()) {
        z1[index_of(c)] = dj.first(b.slot(c), pt);
        z2[index_of(c)] = dj.second(b.slot(c), pt);
      }
      double s = 0.0;
      for (int a = 0; a < kComponents; ++a) {
        s += spec_.lin[a] * z2[a];
        for (int c = 0; c < kComponents; ++c) s += Q(a, c) * (z1[a] * z1[c] + z0[a] * z2[c]);
      }
      w[nb + j] = sr * s;
    }
    return w;
  }

  /// Jacobian of each masked jet component at each residual point, unscaled:
  /// row j * C + k holds component k of the mask at residual point j. The
  /// boundary rows of the unscaled Jacobian precede them.
  Eigen::MatrixXd phi_jacobian(const Eigen::VectorXd& theta) const {
    const MlpParams p = at(theta);
    const BatchNetwork b(p, points_, mask_);
    const std::vector<Component> comps = spec_.mask.components();
    const int nb = boundary_rows();
    const int nr = data_.n_r();
    const int C = static_cast<int>(comps.size());
    Eigen::MatrixXd out(nb + nr * C, static_cast<Eigen::Index>(size()));
    const Eigen::MatrixXd Jb = fold(b.jacobian(selectors(b, false, nullptr, /*boundary_only=*/true)));
    out.topRows(nb) = Jb.topRows(nb);
    for (int k = 0; k < C; ++k) {
      Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(b.blocks(), b.points());
      sel.row(b.slot(comps[static_cast<std::size_t>(k)])).segment(nb, nr).setOnes();
      const Eigen::MatrixXd Jk = b.jacobian(sel);
      for (int j = 0; j < nr; ++j) out.row(nb + j * C + k) = Jk.row(nb + j);
    }
    return out;
  }

  /// Lambda_R: identity on boundary rows, grad R(Phi(x_j)) over the masked
  /// components on residual row j.
  Eigen::MatrixXd lambda_r(const Eigen::VectorXd& theta) const {
    const MlpParams p = at(theta);
    const BatchNetwork b(p, points_, mask_);
    const std::vector<Component> comps = spec_.mask.components();
    const int nb = boundary_rows();
    const int nr = data_.n_r();
    const int C = static_cast<int>(comps.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(nb + nr, nb + nr * C);
    L.topLeftCorner(nb, nb).setIdentity();
    for (int j = 0; j < nr; ++j) {
      const ComponentWeights<double> g = spec_.gradR(phi_of(b.jet(nb + j)));
      for (int k = 0; k < C; ++k) L(nb + j, nb + j * C + k) = g[index_of(comps[static_cast<std::size_t>(k)])];
    }
    return L;
  }

  double relative_l2(const Eigen::VectorXd& theta, bool literal = false) const {
    if (!grid_) return std::numeric_limits<double>::quiet_NaN();
    return tangent_kit::relative_l2(evaluate_batch(at(theta), grid_->points), grid_->exact, literal);
  }

 private:
  Eigen::VectorXd stack(const BatchNetwork& b, bool scaled) const {
    const int nb = boundary_rows();
    Eigen::VectorXd rho(rows());
    for (int i = 0; i < nb; ++i) {
      const BoundaryRow& row = data_.boundary[static_cast<std::size_t>(i)];
      rho[i] = row.coef * b.jet(i)[row.component];
    }
    for (const auto& [row, pt] : pair_of_) {
      const BoundaryRow& br = data_.boundary[static_cast<std::size_t>(row)];
      rho[row] += br.pair_coef * b.jet(pt)[br.component];
    }
    for (int i = 0; i < nb; ++i) rho[i] -= data_.boundary[static_cast<std::size_t>(i)].target;
    for (int j = 0; j < data_.n_r(); ++j) rho[nb + j] = spec_.R(phi_of(b.jet(nb + j))) - forcing_[j];
    if (scaled) {
      rho.head(nb) *= sb_;
      rho.tail(data_.n_r()) *= sr_;
    }
    return rho;
  }

  // Per-point selectors: d rho_row / d output components, optionally
  // multiplied by rho_row (for the summed gradient).
  Eigen::MatrixXd selectors(const BatchNetwork& b, bool scaled, const Eigen::VectorXd* weights,
                            bool boundary_only = false) const {
    const int nb = boundary_rows();
    const double sb = scaled ? sb_ : 1.0;
    const double sr = scaled ? sr_ : 1.0;
    Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(b.blocks(), b.points());
    auto wt = [&](int row) { return weights ? (*weights)[row] : 1.0; };
    for (int i = 0; i < nb; ++i) {
      const BoundaryRow& row = data_.boundary[static_cast<std::size_t>(i)];
      sel(b.slot(row.component), i) = sb * row.coef * wt(i);
    }
    for (const auto& [row, pt] : pair_of_) {
      const BoundaryRow& br = data_.boundary[static_cast<std::size_t>(row)];
      sel(b.slot(br.component), pt) = sb * br.pair_coef * wt(row);
    }
    if (boundary_only) return sel;
    for (int j = 0; j < data_.n_r(); ++j) {
      const ComponentWeights<double> g = spec_.gradR(phi_of(b.jet(nb + j)));
      const double f = sr * wt(nb + j);
      for (Component c : b.components()) sel(b.slot(c), nb + j) = f * g[index_of(c)];
    }
    return sel;
  }

  // Adds pair-point rows into their parent rows and drops them.
  Eigen::MatrixXd fold(Eigen::MatrixXd Jp) const {
    if (pair_of_.empty()) return Jp;
    for (const auto& [row, pt] : pair_of_) Jp.row(row) += Jp.row(pt);
    Jp.conservativeResize(rows(), Eigen::NoChange);
    return Jp;
  }

  MlpParams net_;
  ResidualSpec spec_;
  CollocationSet data_;
  std::optional<EvalGrid> grid_;
  DerivativeMask mask_;
  PointSet points_;
  std::vector<std::pair<int, int>> pair_of_;
  Eigen::VectorXd forcing_;
  double sb_ = 1.0;
  double sr_ = 1.0;
};

}  // namespace tangent_kit
