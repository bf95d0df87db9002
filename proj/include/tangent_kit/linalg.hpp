#pragma once

// Dense helpers: Gram products through BLAS syrk, power iteration for
// spectral norms, Gauss-Hermite rules.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cblas.h>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "tangent_kit/rng.hpp"

namespace tangent_kit {

inline void symmetrize_from_upper(Eigen::MatrixXd& G) {
  G.triangularView<Eigen::StrictlyLower>() = G.transpose().triangularView<Eigen::StrictlyLower>();
}

/// J^T J.
inline Eigen::MatrixXd gram_columns(const Eigen::MatrixXd& J) {
  const int n = static_cast<int>(J.rows());
  const int p = static_cast<int>(J.cols());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(p, p);
  if (n == 0 || p == 0) return G;
  cblas_dsyrk(CblasColMajor, CblasUpper, CblasTrans, p, n, 1.0, J.data(), n, 0.0, G.data(), p);
  symmetrize_from_upper(G);
  return G;
}

/// J J^T.
inline Eigen::MatrixXd gram_rows(const Eigen::MatrixXd& J) {
  const int n = static_cast<int>(J.rows());
  const int p = static_cast<int>(J.cols());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  if (n == 0 || p == 0) return K;
  cblas_dsyrk(CblasColMajor, CblasUpper, CblasNoTrans, n, p, 1.0, J.data(), n, 0.0, K.data(), n);
  symmetrize_from_upper(K);
  return K;
}

struct PowerIteration {
  double norm = 0.0;
  int iterations = 0;
  double residual = 0.0;  // |A^2 v - mu v| / mu at exit
  bool converged = false;
};

/// Largest |eigenvalue| of a symmetric operator. Iterates on A^2 so that a
/// dominant +/- pair (common for indefinite Hessians) still converges; stops
/// once the A^2 eigen-residual is below `tol`. The start vector is drawn from
/// `seed`.
inline PowerIteration power_iteration(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                                      Eigen::Index dim, std::uint64_t seed, double tol = 1e-6, int max_iter = 500) {
  PowerIteration out;
  if (dim == 0) {
    out.converged = true;
    return out;
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal(rng);
  v.normalize();
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd w = apply(v);
    const double wn = w.norm();
    out.iterations = it;
    if (wn == 0.0) {
      out.norm = 0.0;
      out.residual = 0.0;
      out.converged = true;
      return out;
    }
    const Eigen::VectorXd z = apply(w);
    const double mu = wn * wn;
    const double zn = z.norm();
    out.norm = zn / wn;
    out.residual = (z - mu * v).norm() / mu;
    if (out.residual <= tol) {
      out.converged = true;
      return out;
    }
    v = z / zn;
  }
  return out;
}

/// Eigenvalues of a symmetric matrix, descending.
inline Eigen::VectorXd eigenvalues_descending(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver did not converge");
  return es.eigenvalues().reverse();
}

/// Spectral norm of a symmetric matrix.
inline double symmetric_norm(const Eigen::MatrixXd& S) {
  if (S.size() == 0) return 0.0;
  const Eigen::VectorXd ev = eigenvalues_descending(S);
  return std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
}

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Gauss-Hermite rule for the weight exp(-x^2) (Golub-Welsch).
inline QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw std::invalid_argument("gauss_hermite: order must be positive");
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    T(k, k - 1) = T(k - 1, k) = std::sqrt(0.5 * k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  QuadratureRule q;
  q.nodes = es.eigenvalues();
  q.weights = std::sqrt(std::numbers::pi) * es.eigenvectors().row(0).transpose().array().square();
  return q;
}

/// E[f(Z)] for Z ~ N(0, 1).
inline double gaussian_expectation(const QuadratureRule& q, const std::function<double(double)>& f) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * f(std::sqrt(2.0) * q.nodes[i]);
  return s / std::sqrt(std::numbers::pi);
}

}  // namespace tangent_kit
