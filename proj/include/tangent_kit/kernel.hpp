#pragma once

// Neural tangent kernel objects: Jacobians, K = J J^T and its factorization
// through the residual gradient, residual Hessians, projector spectra and the
// infinite-width covariance of the derivative features.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tangent_kit/batch.hpp"
#include "tangent_kit/jets.hpp"
#include "tangent_kit/linalg.hpp"
#include "tangent_kit/net.hpp"
#include "tangent_kit/pde.hpp"
#include "tangent_kit/problem.hpp"
#include "tangent_kit/rng.hpp"

namespace tangent_kit {

/// Boundary rows then residual rows; scaled rows carry 1/sqrt(N_b), 1/sqrt(N_r).
inline Eigen::MatrixXd assemble_jacobian(const MlpParams& params, const ResidualSpec& spec, const CollocationSet& data,
                                         bool scaled = false) {
  PinnProblem prob(params, spec, data);
  return prob.linearize(params.theta, scaled).J;
}

struct KernelSnapshot {
  Eigen::MatrixXd K;
  Eigen::VectorXd eigenvalues;  // descending
  double spectral_norm = 0.0;
  std::optional<Eigen::MatrixXd> lambda_r;
  std::optional<Eigen::MatrixXd> k_phi;
};

inline KernelSnapshot kernel(const Eigen::MatrixXd& J) {
  if (!J.allFinite()) throw std::invalid_argument("kernel: Jacobian has non-finite entries");
  KernelSnapshot s;
  s.K = gram_rows(J);
  s.eigenvalues = eigenvalues_descending(s.K);
  s.spectral_norm = s.eigenvalues.size() ? s.eigenvalues[0] : 0.0;
  return s;
}

/// Spectral norm of K = J J^T, from the top singular value of J when J is wide.
inline double kernel_norm(const Eigen::MatrixXd& J) {
  if (J.rows() <= J.cols()) return symmetric_norm(gram_rows(J));
  return symmetric_norm(gram_columns(J));
}

struct Decomposition {
  Eigen::MatrixXd lambda_r;
  Eigen::MatrixXd k_phi;
  Eigen::MatrixXd K;
  double relative_error = 0.0;  // |Lambda K_phi Lambda^T - K| / |K|, spectral
};

inline Decomposition decompose(const MlpParams& params, const ResidualSpec& spec, const CollocationSet& data) {
  PinnProblem prob(params, spec, data);
  Decomposition d;
  d.lambda_r = prob.lambda_r(params.theta);
  d.k_phi = gram_rows(prob.phi_jacobian(params.theta));
  d.K = gram_rows(prob.linearize(params.theta, false).J);
  const Eigen::MatrixXd rec = d.lambda_r * d.k_phi * d.lambda_r.transpose();
  const double kn = symmetric_norm(d.K);
  d.relative_error = kn > 0.0 ? symmetric_norm(rec - d.K) / kn : symmetric_norm(rec);
  return d;
}

inline double kernel_drift(const Eigen::MatrixXd& Kt, const Eigen::MatrixXd& K0) {
  if (Kt.rows() != K0.rows() || Kt.cols() != K0.cols()) throw std::invalid_argument("kernel_drift: shape mismatch");
  const double n0 = symmetric_norm(K0);
  if (n0 == 0.0) throw std::invalid_argument("kernel_drift: reference kernel is zero");
  return symmetric_norm(Kt - K0) / n0;
}

/// Gradient of the (unscaled) residual r at one point.
inline Eigen::VectorXd residual_gradient(const MlpParams& params, const ResidualSpec& spec, std::span<const double> point) {
  auto [jet, tape] = forward_jet(params, point, spec.mask.closure());
  return reverse_sweep(tape, spec.gradR(phi_of(jet)));
}

/// H_r v for the parameter Hessian of the residual at one point: forward-mode
/// differentiation of the reverse sweep, with the selector grad R(Phi)
/// differentiated along v as well.
inline Eigen::VectorXd residual_hvp(const Tape<double>& tape, const ResidualSpec& spec, std::span<const double> v) {
  if (v.size() != tape.param_count()) throw std::invalid_argument("residual_hvp: direction has wrong length");
  const Tape<Dual> dual = tape.replay<Dual>(v);
  const SpatialJet<Dual>& phi = dual.output();
  ComponentWeights<Dual> sel{};
  for (int a = 0; a < kComponents; ++a) {
    Dual g(spec.lin[a]);
    for (int b = 0; b < kComponents; ++b) {
      if (spec.Q(a, b) != 0.0) g += spec.Q(a, b) * phi[kAllComponents[static_cast<std::size_t>(b)]];
    }
    sel[a] = g;
  }
  const std::vector<Dual> g = reverse_sweep<Dual>(dual, sel);
  Eigen::VectorXd out(static_cast<Eigen::Index>(g.size()));
  for (std::size_t k = 0; k < g.size(); ++k) out[static_cast<Eigen::Index>(k)] = g[k].d;
  return out;
}

enum class HessianMode { dense, norm_only };

inline constexpr std::size_t kDenseHessianCap = 4 * 64 * 64;

struct HessianReport {
  int width = 0;
  std::optional<Eigen::MatrixXd> dense;
  std::optional<Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>> sparsity;  // |entry| > 1e-12
  double spectral_norm = 0.0;
  PowerIteration power;
  std::vector<std::string> block_labels;  // per parameter: W<l> or b<l>
};

inline std::vector<std::string> block_labels(const MlpParams& params) {
  std::vector<std::string> labels(params.size());
  for (std::size_t l = 0; l < params.layout.size(); ++l) {
    const LayerBlock& b = params.layout[l];
    for (std::size_t k = 0; k < b.weight_count(); ++k) labels[b.offset + k] = "W" + std::to_string(l);
    for (int r = 0; r < b.rows; ++r) labels[b.bias_offset() + static_cast<std::size_t>(r)] = "b" + std::to_string(l);
  }
  return labels;
}

inline HessianReport residual_hessian(const MlpParams& params, const ResidualSpec& spec, std::span<const double> point,
                                      HessianMode mode, std::uint64_t seed = 0) {
  const std::size_t p = params.size();
  if (mode == HessianMode::dense && p > kDenseHessianCap) {
    throw std::invalid_argument("residual_hessian: dense mode is capped at " + std::to_string(kDenseHessianCap) +
                                " parameters");
  }
  HessianReport rep;
  rep.width = params.widths.size() > 2 ? params.widths[1] : 0;
  rep.block_labels = block_labels(params);
  auto [jet, tape] = forward_jet(params, point, spec.mask.closure());
  auto apply = [&](const Eigen::VectorXd& v) {
    return residual_hvp(tape, spec, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  };
  if (mode == HessianMode::dense) {
    Eigen::MatrixXd H(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    for (std::size_t k = 0; k < p; ++k) {
      e[static_cast<Eigen::Index>(k)] = 1.0;
      H.col(static_cast<Eigen::Index>(k)) = apply(e);
      e[static_cast<Eigen::Index>(k)] = 0.0;
    }
    rep.sparsity = (H.array().abs() > 1e-12).matrix();
    rep.dense = std::move(H);
  }
  rep.power = power_iteration(apply, static_cast<Eigen::Index>(p), seed);
  rep.spectral_norm = rep.power.norm;
  return rep;
}

struct ProjectorSpectrum {
  Eigen::VectorXd values;           // thresholded eigenvalues of J (J^T J)^+ J^T, in {0, 1}, descending
  Eigen::VectorXd realized;         // eigenvalues of the assembled operator, descending
  Eigen::VectorXd singular_values;  // of J, descending
  int rank = 0;
};

inline ProjectorSpectrum projector_spectrum(const Eigen::MatrixXd& J, double rank_tolerance = 1e-10) {
  if (!J.allFinite()) throw std::invalid_argument("projector_spectrum: Jacobian has non-finite entries");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("projector_spectrum: SVD failed");
  ProjectorSpectrum out;
  out.singular_values = svd.singularValues();
  const double smax = out.singular_values.size() ? out.singular_values[0] : 0.0;
  const Eigen::Index n = J.rows();
  for (Eigen::Index k = 0; k < out.singular_values.size(); ++k) {
    if (smax > 0.0 && out.singular_values[k] > rank_tolerance * smax) ++out.rank;
  }
  out.values = Eigen::VectorXd::Zero(n);
  out.values.head(out.rank).setOnes();
  // J V_r Sigma_r^-2 V_r^T J^T, the pseudoinverse route written out.
  const Eigen::MatrixXd JV = J * svd.matrixV().leftCols(out.rank);
  const Eigen::VectorXd inv2 = out.singular_values.head(out.rank).array().square().inverse();
  const Eigen::MatrixXd P = JV * inv2.asDiagonal() * JV.transpose();
  out.realized = eigenvalues_descending(0.5 * (P + P.transpose()));
  return out;
}

/// Phi components of tanh(u x + v) as functions of x, for the 1D toy masks.
inline double phi_feature(Component c, double u, double v, double x) {
  const double t = std::tanh(u * x + v);
  const double s1 = 1.0 - t * t;
  switch (c) {
    case Component::value: return t;
    case Component::d0: return u * s1;
    case Component::d00: return u * u * (-2.0 * t * s1);
    default: throw std::invalid_argument("limit_covariance: component not defined in one dimension");
  }
}

/// Sigma(x, x')_{ij} = E_{u,v ~ N(0,1)}[Phi_i[tanh(u x + v)](x) Phi_j[tanh(u x' + v)](x')],
/// by tensor Gauss-Hermite quadrature.
inline Eigen::MatrixXd limit_covariance(const DerivativeMask& mask, double x, double xp, int order = 64) {
  if (order < 8) throw std::invalid_argument("limit_covariance: quadrature order must be at least 8");
  if (!mask.valid_for(1)) throw std::invalid_argument("limit_covariance: mask must be one-dimensional");
  const std::vector<Component> comps = mask.components();
  const QuadratureRule q = gauss_hermite(order);
  const int C = static_cast<int>(comps.size());
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(C, C);
  for (Eigen::Index a = 0; a < q.nodes.size(); ++a) {
    const double u = std::sqrt(2.0) * q.nodes[a];
    for (Eigen::Index b = 0; b < q.nodes.size(); ++b) {
      const double v = std::sqrt(2.0) * q.nodes[b];
      const double w = q.weights[a] * q.weights[b] / std::numbers::pi;
      for (int i = 0; i < C; ++i) {
        const double fi = phi_feature(comps[static_cast<std::size_t>(i)], u, v, x);
        for (int j = 0; j < C; ++j) S(i, j) += w * fi * phi_feature(comps[static_cast<std::size_t>(j)], u, v, xp);
      }
    }
  }
  return S;
}

/// Contribution of the output-layer weights to K_Phi between x and x'.
inline Eigen::MatrixXd phi_kernel_output_block(const MlpParams& params, const DerivativeMask& mask, double x, double xp) {
  PointSet pts(2, 1);
  pts << x, xp;
  const BatchNetwork b(params, pts, mask);
  const std::vector<Component> comps = mask.components();
  const LayerBlock& last = params.layout.back();
  const int C = static_cast<int>(comps.size());
  Eigen::MatrixXd Jx(C, last.cols), Jxp(C, last.cols);
  for (int k = 0; k < C; ++k) {
    Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(b.blocks(), 2);
    sel(b.slot(comps[static_cast<std::size_t>(k)]), 0) = 1.0;
    sel(b.slot(comps[static_cast<std::size_t>(k)]), 1) = 1.0;
    const Eigen::MatrixXd J = b.jacobian(sel);
    Jx.row(k) = J.row(0).segment(static_cast<Eigen::Index>(last.offset), last.cols);
    Jxp.row(k) = J.row(1).segment(static_cast<Eigen::Index>(last.offset), last.cols);
  }
  return Jx * Jxp.transpose();
}

struct HessianNormRow {
  int width = 0;
  int seed = 0;
  double norm = 0.0;
  bool converged = false;
};

/// Single-hidden-layer Gaussian NTK nets, residual Hessian norm at the
/// mid-domain point for each (width, seed).
inline std::vector<HessianNormRow> hessian_norm_sweep(const ResidualSpec& spec, const std::vector<int>& widths,
                                                      const std::vector<int>& seeds, std::uint64_t root_seed = 0) {
  for (std::size_t i = 1; i < widths.size(); ++i) {
    if (widths[i] <= widths[i - 1]) throw std::invalid_argument("hessian_norm_sweep: widths must be ascending");
  }
  std::vector<double> mid(static_cast<std::size_t>(spec.d_in));
  for (int a = 0; a < spec.d_in; ++a) mid[static_cast<std::size_t>(a)] = 0.5 * (spec.domain.lo[a] + spec.domain.hi[a]);
  std::vector<HessianNormRow> rows;
  for (int m : widths) {
    for (int s : seeds) {
      const std::uint64_t seed = derive_seed(root_seed, "hessian-norm", static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(s));
      const MlpParams net = init_gaussian({spec.d_in, m, 1}, seed);
      const HessianReport rep = residual_hessian(net, spec, mid, HessianMode::norm_only, splitmix64(seed));
      rows.push_back({m, s, rep.spectral_norm, rep.power.converged});
    }
  }
  return rows;
}

}  // namespace tangent_kit
