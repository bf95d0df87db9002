#pragma once

// Optimizers over least-squares problems L(theta) = 1/2 |rho(theta)|^2.
//
// A Problem provides
//   size(), rows(),
//   residuals(theta), linearize(theta) -> {rho, J},
//   loss_and_gradient(theta), second_directional(theta, v),
//   terms(rho) -> LossTerms, relative_l2(theta) (NaN when unavailable).

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tangent_kit/kernel.hpp"
#include "tangent_kit/linalg.hpp"
#include "tangent_kit/pde.hpp"

namespace tangent_kit {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct TrainRecord {
  long iter = 0;
  double loss = 0.0;
  double loss_b = 0.0;
  double loss_r = 0.0;
  double rel_l2 = kNaN;
  double lambda = kNaN;  // accepted damping, LM only
  double wall_ms = 0.0;
  int stage = 0;
  // LM diagnostics
  double lambda_start = kNaN;
  int doublings = 0;
  int retries = 0;
  double lambda_next = kNaN;
  double criterion = kNaN;
  double solve_residual = kNaN;
  bool accel_applied = false;
  bool accel_reverted = false;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  std::vector<std::size_t> stage_starts;  // index of the first record of each stage
  std::vector<double> stage_values;
  std::string status = "ok";
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw std::runtime_error(std::string(what) + " is not finite");
}

template <class Problem>
TrainRecord record_at(const Problem& prob, const Eigen::VectorXd& theta, const Eigen::VectorXd& rho, long iter,
                      bool eval_rel, double wall_ms) {
  const LossTerms t = prob.terms(rho);
  TrainRecord r;
  r.iter = iter;
  r.loss = t.total;
  r.loss_b = t.boundary;
  r.loss_r = t.residual;
  r.rel_l2 = eval_rel ? prob.relative_l2(theta) : kNaN;
  r.wall_ms = wall_ms;
  return r;
}

inline bool due(long iter, long every, long last) { return every > 0 && (iter % every == 0 || iter == last); }

}  // namespace detail

// ---------------------------------------------------------------- first order

template <class Problem>
Eigen::VectorXd gd_step(const Problem& prob, const Eigen::VectorXd& theta, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("gd_step: eta must be positive");
  const Eigen::VectorXd g = prob.loss_and_gradient(theta).second;
  detail::require_finite(g, "gradient");
  return theta - eta * g;
}

struct GdOptions {
  double eta = 1e-3;
  long iterations = 1000;
  long eval_every = 0;  // relative L2 cadence, 0 = never
};

/// Gradient descent; record k holds the state after k steps.
template <class Problem>
TrainLog gd_train(const Problem& prob, Eigen::VectorXd& theta, const GdOptions& opt) {
  if (!(opt.eta > 0.0)) throw std::invalid_argument("gd: eta must be positive");
  TrainLog log;
  detail::Stopwatch clock;
  for (long k = 0;; ++k) {
    auto [L, g] = prob.loss_and_gradient(theta);
    detail::require_finite(g, "gradient");
    if (k > 0) {
      TrainRecord r = detail::record_at(prob, theta, prob.residuals(theta), k, detail::due(k, opt.eval_every, opt.iterations),
                                        clock.ms());
      log.records.push_back(r);
    }
    if (k == opt.iterations) break;
    theta -= opt.eta * g;
  }
  return log;
}

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long iterations = 20000;
  double wall_budget_ms = 0.0;  // stop once exceeded; 0 = unlimited
  long eval_every = 100;
  double target_rel_l2 = 0.0;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;
};

inline Eigen::VectorXd adam_step(AdamState& s, const Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr = 1e-3,
                                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  detail::require_finite(theta, "parameters");
  detail::require_finite(grad, "gradient");
  if (s.t == 0) {
    s.m = Eigen::VectorXd::Zero(theta.size());
    s.v = Eigen::VectorXd::Zero(theta.size());
  }
  ++s.t;
  s.m = beta1 * s.m + (1.0 - beta1) * grad;
  s.v = beta2 * s.v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
  const Eigen::ArrayXd mhat = s.m.array() / c1;
  const Eigen::ArrayXd vhat = s.v.array() / c2;
  return theta - (lr * mhat / (vhat.sqrt() + eps)).matrix();
}

template <class Problem>
TrainLog adam_train(const Problem& prob, Eigen::VectorXd& theta, const AdamOptions& opt) {
  TrainLog log;
  AdamState state;
  detail::Stopwatch clock;
  for (long k = 0;; ++k) {
    auto [L, g] = prob.loss_and_gradient(theta);
    if (k > 0) {
      const bool last = k == opt.iterations || (opt.wall_budget_ms > 0.0 && clock.ms() >= opt.wall_budget_ms);
      TrainRecord r = detail::record_at(prob, theta, prob.residuals(theta), k,
                                        detail::due(k, opt.eval_every, opt.iterations) || last, clock.ms());
      log.records.push_back(r);
      if (last) {
        if (k < opt.iterations) log.status = "wall budget reached";
        break;
      }
      if (opt.target_rel_l2 > 0.0 && std::isfinite(r.rel_l2) && r.rel_l2 <= opt.target_rel_l2) {
        log.status = "target reached";
        break;
      }
    }
    if (k == opt.iterations) break;
    theta = adam_step(state, theta, g, opt.lr, opt.beta1, opt.beta2, opt.eps);
  }
  return log;
}

// ---------------------------------------------------------------- L-BFGS

struct LbfgsHistory {
  int memory = 10;
  std::deque<Eigen::VectorXd> s;
  std::deque<Eigen::VectorXd> y;

  void push(const Eigen::VectorXd& sk, const Eigen::VectorXd& yk) {
    if (sk.dot(yk) <= 1e-12 * sk.norm() * yk.norm()) return;  // curvature condition fails: skip
    s.push_back(sk);
    y.push_back(yk);
    while (static_cast<int>(s.size()) > memory) {
      s.pop_front();
      y.pop_front();
    }
  }
  void clear() {
    s.clear();
    y.clear();
  }
};

/// H g for the two-loop inverse-Hessian approximation with H0 = gamma I,
/// gamma = s^T y / y^T y of the newest pair.
inline Eigen::VectorXd lbfgs_apply(const LbfgsHistory& h, const Eigen::VectorXd& g) {
  const std::size_t k = h.s.size();
  Eigen::VectorXd q = g;
  std::vector<double> alpha(k), rho(k);
  for (std::size_t i = k; i-- > 0;) {
    rho[i] = 1.0 / h.y[i].dot(h.s[i]);
    alpha[i] = rho[i] * h.s[i].dot(q);
    q -= alpha[i] * h.y[i];
  }
  const double gamma = k ? h.s.back().dot(h.y.back()) / h.y.back().squaredNorm() : 1.0;
  Eigen::VectorXd r = gamma * q;
  for (std::size_t i = 0; i < k; ++i) {
    const double beta = rho[i] * h.y[i].dot(r);
    r += (alpha[i] - beta) * h.s[i];
  }
  return r;
}

struct LbfgsStep {
  Eigen::VectorXd theta;
  double loss = 0.0;
  Eigen::VectorXd grad;
  int halvings = 0;
  bool fell_back = false;  // steepest descent used
  bool failed = false;     // no decrease found, theta unchanged
};

/// One L-BFGS iteration with Armijo backtracking (c = 1e-4, at most 30
/// reductions). Trial steps come from a secant on the directional derivative,
/// t* = t phi'(0) / (phi'(0) - phi'(t)), which is exact on quadratics: after
/// an acceptable step t* is tried as well and kept if no worse, and after a
/// rejected one the step shrinks to t* clamped to [0.1 t, 0.5 t]. On failure
/// the history is dropped and steepest descent is tried.
template <class Problem>
LbfgsStep lbfgs_step(LbfgsHistory& hist, const Problem& prob, const Eigen::VectorXd& theta, double loss,
                     const Eigen::VectorXd& grad) {
  constexpr double c1 = 1e-4;
  constexpr int max_halvings = 30;
  LbfgsStep out;
  auto search = [&](const Eigen::VectorXd& d) -> bool {
    const double slope = grad.dot(d);
    double t = 1.0;
    for (int h = 0; h <= max_halvings; ++h) {
      const Eigen::VectorXd cand = theta + t * d;
      auto [L, g] = prob.loss_and_gradient(cand);
      const double dphi = g.dot(d);
      const double ts = dphi - slope > 0.0 ? -t * slope / (dphi - slope) : -1.0;
      if (std::isfinite(L) && L <= loss + c1 * t * slope) {
        out.theta = cand;
        out.loss = L;
        out.grad = std::move(g);
        out.halvings = h;
        if (ts > 0.0 && ts <= 100.0 * t && std::abs(ts / t - 1.0) > 1e-12) {
          const Eigen::VectorXd c2 = theta + ts * d;
          auto [L2, g2] = prob.loss_and_gradient(c2);
          if (std::isfinite(L2) && L2 <= out.loss) {
            out.theta = c2;
            out.loss = L2;
            out.grad = std::move(g2);
          }
        }
        return true;
      }
      t = std::isfinite(L) && ts > 0.0 ? std::clamp(ts, 0.1 * t, 0.5 * t) : 0.5 * t;
    }
    return false;
  };
  Eigen::VectorXd d = -lbfgs_apply(hist, grad);
  if (!(grad.dot(d) < 0.0)) {
    d = -grad;
    out.fell_back = true;
  }
  bool ok = search(d);
  if (!ok && !out.fell_back) {
    hist.clear();
    out.fell_back = true;
    ok = search(-grad);
  }
  if (!ok) {
    out.failed = true;
    out.theta = theta;
    out.loss = loss;
    out.grad = grad;
    return out;
  }
  hist.push(out.theta - theta, out.grad - grad);
  return out;
}

struct LbfgsOptions {
  int memory = 10;
  long iterations = 1000;
  long eval_every = 10;
  double wall_budget_ms = 0.0;
};

template <class Problem>
TrainLog lbfgs_train(const Problem& prob, Eigen::VectorXd& theta, const LbfgsOptions& opt) {
  TrainLog log;
  LbfgsHistory hist;
  hist.memory = opt.memory;
  detail::Stopwatch clock;
  auto [L, g] = prob.loss_and_gradient(theta);
  for (long k = 1; k <= opt.iterations; ++k) {
    LbfgsStep st = lbfgs_step(hist, prob, theta, L, g);
    theta = st.theta;
    L = st.loss;
    g = st.grad;
    const bool last = k == opt.iterations || st.failed || (opt.wall_budget_ms > 0.0 && clock.ms() >= opt.wall_budget_ms);
    log.records.push_back(detail::record_at(prob, theta, prob.residuals(theta), k,
                                            detail::due(k, opt.eval_every, opt.iterations) || last, clock.ms()));
    if (st.failed) {
      log.status = "line search failed";
      break;
    }
    if (last) break;
  }
  return log;
}

// ---------------------------------------------------------------- Levenberg-Marquardt

struct LMState {
  double lambda = 1e-2;
  double Lambda_max = 1e10;
  double tol = 1e-3;
  double alpha = 0.75;
  long iteration = 0;
  double last_criterion = kNaN;

  void validate() const {
    if (!(Lambda_max > 0.0)) throw std::invalid_argument("lm: Lambda_max must be positive");
    if (!(lambda > 0.0) || lambda > Lambda_max) throw std::invalid_argument("lm: lambda must lie in (0, Lambda_max]");
    if (!(tol >= 0.0 && tol < 0.25)) throw std::invalid_argument("lm: tol must lie in [0, 1/4)");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("lm: alpha must lie in [0, 1)");
  }
};

struct LmSolve {
  Eigen::VectorXd x;
  double lambda = 0.0;          // damping actually factorized
  double residual = 0.0;        // backward error |A x - b| / (|A|_F |x| + |b|), A = J^T J + lambda I, b = J^T r
  int retries = 0;              // factor-10 increases after failed factorizations
  bool ok = true;
};

/// (J^T J + lambda I) x = J^T r for varying lambda and right-hand sides. Uses
/// the p x p normal matrix when J is tall and the n x n kernel J J^T (with
/// x = J^T (J J^T + lambda I)^-1 r) when J is wide.
class DampedSystem {
 public:
  explicit DampedSystem(const Eigen::MatrixXd& J) : J_(J), primal_(J.rows() >= J.cols()) {
    G_ = primal_ ? gram_columns(J) : gram_rows(J);
    g_frob2_ = G_.squaredNorm();
    g_trace_ = G_.trace();
  }

  bool primal() const { return primal_; }

  LmSolve solve(double lambda, const Eigen::VectorXd& r, int max_retries = 5) {
    LmSolve out;
    out.lambda = lambda;
    while (!factor(out.lambda)) {
      if (out.retries == max_retries) {
        out.ok = false;
        return out;
      }
      out.lambda *= 10.0;
      ++out.retries;
    }
    const Eigen::VectorXd b = J_.transpose() * r;
    if (primal_) {
      out.x = llt_.solve(b);
      const Eigen::VectorXd res = b - (G_ * out.x + out.lambda * out.x);
      out.x += llt_.solve(res);
    } else {
      Eigen::VectorXd y = llt_.solve(r);
      const Eigen::VectorXd res = r - (G_ * y + out.lambda * y);
      y += llt_.solve(res);
      out.x = J_.transpose() * y;
    }
    const Eigen::VectorXd lhs = J_.transpose() * (J_ * out.x) + out.lambda * out.x;
    // |J^T J + lambda I|_F from the Gram matrix of either side
    const double a_frob = std::sqrt(g_frob2_ + 2.0 * out.lambda * g_trace_ + out.lambda * out.lambda * static_cast<double>(J_.cols()));
    const double den = a_frob * out.x.norm() + b.norm();
    out.residual = den > 0.0 ? (lhs - b).norm() / den : 0.0;
    out.ok = out.x.allFinite();
    return out;
  }

 private:
  bool factor(double lambda) {
    if (factored_ && lambda == lambda_) return true;
    Eigen::MatrixXd M = G_;
    M.diagonal().array() += lambda;
    llt_.compute(M);
    factored_ = llt_.info() == Eigen::Success;
    lambda_ = lambda;
    return factored_;
  }

  const Eigen::MatrixXd& J_;
  bool primal_;
  Eigen::MatrixXd G_;
  double g_frob2_ = 0.0;
  double g_trace_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool factored_ = false;
  double lambda_ = kNaN;
};

/// v = -(J^T J + lambda I)^-1 J^T rho.
inline LmSolve lm_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& rho, double lambda) {
  DampedSystem sys(J);
  LmSolve s = sys.solve(lambda, rho);
  s.x = -s.x;
  return s;
}

/// Actual over predicted decrease of |rho|^2:
///   (|rho(theta)|^2 - |rho(theta + v)|^2) / <v, lambda v - grad L>,
/// with grad L = J^T rho. Returns -inf for a zero denominator or a
/// non-finite trial loss.
inline double lm_criterion(double rho2_old, double rho2_new, const Eigen::VectorXd& v, double lambda,
                           const Eigen::VectorXd& grad) {
  if (!std::isfinite(rho2_new) || !std::isfinite(rho2_old)) return -std::numeric_limits<double>::infinity();
  const double den = v.dot(lambda * v - grad);
  if (den == 0.0 || !std::isfinite(den)) return -std::numeric_limits<double>::infinity();
  return (rho2_old - rho2_new) / den;
}

/// a = -(J^T J + lambda I)^-1 J^T w, w the second directional derivative of
/// the residuals along v.
inline LmSolve geodesic_acceleration(DampedSystem& sys, double lambda, const Eigen::VectorXd& w) {
  LmSolve s = sys.solve(lambda, w);
  s.x = -s.x;
  return s;
}

struct LmOptions {
  long iterations = 1000;
  bool geodesic = true;
  int max_doublings = 60;
  double grad_tol = 0.0;       // stop when |grad L| <= grad_tol
  double target_rel_l2 = 0.0;  // stop when reached (0 = off)
  long eval_every = 1;
  double wall_budget_ms = 0.0;
};

template <class Problem>
TrainLog lm_train(const Problem& prob, Eigen::VectorXd& theta, LMState& state, const LmOptions& opt) {
  state.validate();
  TrainLog log;
  detail::Stopwatch clock;
  Linearization lin = prob.linearize(theta);
  for (long k = 1; k <= opt.iterations; ++k) {
    const Eigen::VectorXd g = lin.J.transpose() * lin.rho;
    detail::require_finite(g, "gradient");
    if (g.norm() <= opt.grad_tol || g.squaredNorm() == 0.0) {
      log.status = "converged";
      break;
    }
    const double rho2 = lin.rho.squaredNorm();
    DampedSystem sys(lin.J);
    TrainRecord rec;
    rec.lambda_start = state.lambda;
    LmSolve step;
    Eigen::VectorXd rho_new;
    double C = -std::numeric_limits<double>::infinity();
    for (;;) {
      step = sys.solve(state.lambda, lin.rho);
      rec.retries += step.retries;
      if (!step.ok) {
        log.status = "factorization failed";
        return log;
      }
      state.lambda = step.lambda;
      step.x = -step.x;
      rho_new = prob.residuals(theta + step.x);
      C = lm_criterion(rho2, rho_new.squaredNorm(), step.x, state.lambda, g);
      if (C >= state.tol) break;
      if (rec.doublings == opt.max_doublings) {
        log.status = "inner loop exceeded " + std::to_string(opt.max_doublings) + " doublings";
        return log;
      }
      state.lambda = std::min(2.0 * state.lambda, state.Lambda_max);
      ++rec.doublings;
    }
    const double lambda_acc = state.lambda;
    Eigen::VectorXd next = theta + step.x;
    state.lambda = std::max(state.lambda / 3.0, 1.0 / state.Lambda_max);
    if (opt.geodesic) {
      const Eigen::VectorXd w = prob.second_directional(theta, step.x);
      const LmSolve a = geodesic_acceleration(sys, lambda_acc, w);
      if (a.ok && a.x.squaredNorm() > 0.0 && 2.0 * a.x.norm() <= state.alpha * step.x.norm()) {
        const Eigen::VectorXd cand = next + 0.5 * a.x;
        const Eigen::VectorXd rho_c = prob.residuals(cand);
        if (std::isfinite(rho_c.squaredNorm()) && rho_c.squaredNorm() <= rho_new.squaredNorm()) {
          next = cand;
          rho_new = rho_c;
          rec.accel_applied = true;
        } else {
          rec.accel_reverted = true;
        }
      }
    }
    theta = std::move(next);
    state.iteration = k;
    state.last_criterion = C;
    const bool eval = detail::due(k, opt.eval_every, opt.iterations) || opt.target_rel_l2 > 0.0;
    TrainRecord r = detail::record_at(prob, theta, rho_new, k, eval, clock.ms());
    r.lambda = lambda_acc;
    r.lambda_start = rec.lambda_start;
    r.doublings = rec.doublings;
    r.retries = rec.retries;
    r.lambda_next = state.lambda;
    r.criterion = C;
    r.solve_residual = step.residual;
    r.accel_applied = rec.accel_applied;
    r.accel_reverted = rec.accel_reverted;
    log.records.push_back(r);
    if (opt.target_rel_l2 > 0.0 && std::isfinite(r.rel_l2) && r.rel_l2 <= opt.target_rel_l2) {
      log.status = "target reached";
      break;
    }
    if (opt.wall_budget_ms > 0.0 && clock.ms() >= opt.wall_budget_ms) {
      log.status = "wall budget reached";
      break;
    }
    if (k < opt.iterations) lin = prob.linearize(theta);
  }
  return log;
}

// ---------------------------------------------------------------- Gauss-Newton flow

struct GnFlowStep {
  int step = 0;
  Eigen::VectorXd outputs;    // rho before the step
  Eigen::VectorXd predicted;  // -dt U_r U_r^T rho
  Eigen::VectorXd actual;     // rho after - rho before
  ProjectorSpectrum spectrum;
};

/// Explicit Euler on d theta / dt = -(J^T J)^+ grad L = -J^+ rho.
template <class Problem>
std::vector<GnFlowStep> gauss_newton_flow(const Problem& prob, Eigen::VectorXd& theta, double dt, int n_steps,
                                          double rank_tolerance = 1e-10) {
  if (prob.size() > 2000 || prob.rows() > 200) throw std::invalid_argument("gauss_newton_flow: limited to p <= 2000, n <= 200");
  std::vector<GnFlowStep> out;
  for (int s = 0; s < n_steps; ++s) {
    const Linearization lin = prob.linearize(theta);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(lin.J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw std::runtime_error("gauss_newton_flow: SVD failed");
    const Eigen::VectorXd sv = svd.singularValues();
    int r = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
      if (sv[0] > 0.0 && sv[k] > rank_tolerance * sv[0]) ++r;
    }
    const Eigen::MatrixXd U = svd.matrixU().leftCols(r);
    const Eigen::MatrixXd V = svd.matrixV().leftCols(r);
    const Eigen::VectorXd coef = U.transpose() * lin.rho;
    const Eigen::VectorXd dtheta = -dt * (V * coef.cwiseQuotient(sv.head(r)));
    GnFlowStep st;
    st.step = s;
    st.outputs = lin.rho;
    st.predicted = -dt * (U * coef);
    st.spectrum = projector_spectrum(lin.J, rank_tolerance);
    theta += dtheta;
    st.actual = prob.residuals(theta) - lin.rho;
    out.push_back(std::move(st));
  }
  return out;
}

// ---------------------------------------------------------------- curriculum

/// Runs `run(problem, theta)` on make(value) for each value of the ascending
/// schedule, warm-starting from the previous stage.
template <class Make, class Run>
TrainLog curriculum(const std::vector<double>& schedule, Eigen::VectorXd& theta, Make&& make, Run&& run) {
  if (schedule.empty()) throw std::invalid_argument("curriculum: empty schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (!(schedule[i] > schedule[i - 1])) throw std::invalid_argument("curriculum: schedule must be ascending");
  }
  TrainLog log;
  long offset = 0;
  double wall = 0.0;
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    auto prob = make(schedule[s]);
    TrainLog part = run(prob, theta);
    log.stage_starts.push_back(log.records.size());
    log.stage_values.push_back(schedule[s]);
    long last = offset;
    double wall_last = wall;
    for (TrainRecord r : part.records) {
      r.iter += offset;
      r.wall_ms += wall;
      r.stage = static_cast<int>(s);
      last = r.iter;
      wall_last = r.wall_ms;
      log.records.push_back(r);
    }
    offset = last;
    wall = wall_last;
    log.status = part.status;
  }
  return log;
}

// ---------------------------------------------------------------- test problems

/// rho = A theta - b.
class LinearLeastSquares {
 public:
  LinearLeastSquares(Eigen::MatrixXd A, Eigen::VectorXd b) : A_(std::move(A)), b_(std::move(b)) {}
  std::size_t size() const { return static_cast<std::size_t>(A_.cols()); }
  int rows() const { return static_cast<int>(A_.rows()); }
  Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const { return A_ * theta - b_; }
  Linearization linearize(const Eigen::VectorXd& theta) const { return {residuals(theta), A_}; }
  std::pair<double, Eigen::VectorXd> loss_and_gradient(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd r = residuals(theta);
    return {0.5 * r.squaredNorm(), A_.transpose() * r};
  }
  Eigen::VectorXd second_directional(const Eigen::VectorXd&, const Eigen::VectorXd&) const {
    return Eigen::VectorXd::Zero(A_.rows());
  }
  LossTerms terms(const Eigen::VectorXd& rho) const {
    LossTerms t;
    t.residual = t.total = 0.5 * rho.squaredNorm();
    return t;
  }
  double relative_l2(const Eigen::VectorXd&) const { return kNaN; }

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
};

}  // namespace tangent_kit
