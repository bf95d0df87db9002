#pragma once

// Experiment kinds as functions of a validated ExperimentConfig. Sweep cells
// (width, seed) are independent and may run on several threads; results are
// collected per cell and emitted in (width, seed) order, so the output does
// not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tangent_kit/artifacts.hpp"
#include "tangent_kit/config.hpp"
#include "tangent_kit/kernel.hpp"
#include "tangent_kit/optim.hpp"
#include "tangent_kit/problem.hpp"

namespace tangent_kit {

/// Worker count: hardware threads, capped by TANGENT_KIT_THREADS; 1 if serial.
inline unsigned resolve_threads(bool serial) {
  if (serial) return 1;
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TANGENT_KIT_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) {
      throw std::invalid_argument("TANGENT_KIT_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    n = std::min(n, static_cast<unsigned>(cap));
  }
  return n;
}

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(threads, n); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ------------------------------------------------------------------ builders

inline ResidualSpec spec_of(const ExperimentConfig& c) { return make_spec(c.pde.name, c.pde.parameters); }

inline CollocationSet data_of(const ExperimentConfig& c, const ResidualSpec& spec) {
  return sample(spec, c.data.n_r, c.data.n_b, parse_sampling(c.data.sampling), derive_seed(c.seed, "data", 0, 0));
}

/// Single-hidden-layer Gaussian NTK net for sweep cell (width, seed index).
inline MlpParams sweep_net(const ExperimentConfig& c, const ResidualSpec& spec, const std::string& study, int width,
                           int seed_index) {
  return init_gaussian({spec.d_in, width, 1}, derive_seed(c.seed, study, static_cast<std::uint64_t>(width),
                                                          static_cast<std::uint64_t>(seed_index)));
}

/// The configured network (hidden widths, init, scaling, optional RFF).
inline MlpParams network_of(const ExperimentConfig& c, const ResidualSpec& spec, const std::string& study) {
  std::vector<int> widths{spec.d_in};
  widths.insert(widths.end(), c.network.hidden.begin(), c.network.hidden.end());
  widths.push_back(1);
  std::optional<FourierEmbedding> emb;
  if (c.rff.enabled) emb = make_fourier_embedding(spec.d_in, c.rff.features, c.rff.sigma, derive_seed(c.seed, "rff", 0, 0));
  const std::uint64_t seed = derive_seed(c.seed, study, 0, 0);
  const Scaling scaling = parse_scaling(c.network.scaling);
  if (c.network.init == "xavier") return init_xavier(widths, seed, std::move(emb), scaling);
  MlpParams p = init_gaussian(widths, seed, std::move(emb));
  p.scaling = scaling;
  return p;
}

inline std::vector<double> mid_point(const ResidualSpec& spec) {
  std::vector<double> mid(static_cast<std::size_t>(spec.d_in));
  for (int a = 0; a < spec.d_in; ++a) mid[static_cast<std::size_t>(a)] = 0.5 * (spec.domain.lo[a] + spec.domain.hi[a]);
  return mid;
}

// ------------------------------------------------------------------ ntk-init

struct InitRow {
  int m = 0;
  int seed = 0;
  double k_norm = 0.0;
};

inline std::vector<InitRow> ntk_init_study(const ExperimentConfig& c, unsigned threads = 1) {
  const ResidualSpec spec = spec_of(c);
  const CollocationSet data = data_of(c, spec);
  const auto& W = c.study.widths;
  const auto& S = c.study.seeds;
  std::vector<InitRow> rows(W.size() * S.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    const int m = W[i / S.size()];
    const int s = S[i % S.size()];
    const MlpParams net = sweep_net(c, spec, "ntk-init", m, s);
    rows[i] = {m, s, kernel_norm(assemble_jacobian(net, spec, data))};
  });
  return rows;
}

inline Table to_table(const std::vector<InitRow>& rows) {
  Table t({"m", "seed", "k_norm"});
  for (const auto& r : rows) t.add(r.m, r.seed, r.k_norm);
  return t;
}

// ----------------------------------------------------------------- ntk-drift

struct DriftRow {
  int m = 0;
  int seed = 0;
  int step = 0;
  double delta_k = 0.0;
};

/// Gradient descent on the collocation loss at step study.eta; the kernel of
/// the unscaled Jacobian is compared with K(0) every record_every steps.
inline std::vector<DriftRow> ntk_drift_study(const ExperimentConfig& c, unsigned threads = 1) {
  const ResidualSpec spec = spec_of(c);
  const CollocationSet data = data_of(c, spec);
  const auto& W = c.study.widths;
  const auto& S = c.study.seeds;
  const int steps = c.study.steps;
  const int every = c.study.record_every;
  std::vector<std::vector<DriftRow>> cells(W.size() * S.size());
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    const int m = W[i / S.size()];
    const int s = S[i % S.size()];
    const PinnProblem prob(sweep_net(c, spec, "ntk-drift", m, s), spec, data);
    Eigen::VectorXd theta = prob.net().theta;
    const Eigen::MatrixXd K0 = gram_rows(prob.linearize(theta, false).J);
    auto& out = cells[i];
    out.push_back({m, s, 0, 0.0});
    for (int k = 1; k <= steps; ++k) {
      theta = gd_step(prob, theta, c.study.eta);
      if (k % every == 0 || k == steps) {
        out.push_back({m, s, k, kernel_drift(gram_rows(prob.linearize(theta, false).J), K0)});
      }
    }
  });
  std::vector<DriftRow> rows;
  for (auto& cell : cells) rows.insert(rows.end(), cell.begin(), cell.end());
  return rows;
}

inline Table to_table(const std::vector<DriftRow>& rows) {
  Table t({"m", "seed", "step", "delta_k"});
  for (const auto& r : rows) t.add(r.m, r.seed, r.step, r.delta_k);
  return t;
}

// -------------------------------------------------------------- hessian-norm

inline std::vector<HessianNormRow> hessian_norm_study(const ExperimentConfig& c, unsigned threads = 1) {
  const ResidualSpec spec = spec_of(c);
  const auto& W = c.study.widths;
  const auto& S = c.study.seeds;
  std::vector<HessianNormRow> rows(W.size() * S.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    rows[i] = hessian_norm_sweep(spec, {W[i / S.size()]}, {S[i % S.size()]}, c.seed).front();
  });
  return rows;
}

inline Table to_table(const std::vector<HessianNormRow>& rows) {
  Table t({"m", "seed", "h_norm"});
  for (const auto& r : rows) t.add(r.width, r.seed, r.norm);
  return t;
}

// ---------------------------------------------------------- hessian-sparsity

/// Dense residual Hessian at the mid-domain point, width study.width, first
/// seed of the list.
inline HessianReport hessian_sparsity_study(const ExperimentConfig& c) {
  const ResidualSpec spec = spec_of(c);
  const std::uint64_t seed = derive_seed(c.seed, "hessian-norm", static_cast<std::uint64_t>(c.study.width),
                                         static_cast<std::uint64_t>(c.study.seeds.front()));
  const MlpParams net = init_gaussian({spec.d_in, c.study.width, 1}, seed);
  return residual_hessian(net, spec, mid_point(spec), HessianMode::dense, splitmix64(seed));
}

inline Table sparsity_table(const HessianReport& rep) {
  Table t({"row", "col", "abs_value"});
  const Eigen::MatrixXd& H = *rep.dense;
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    for (Eigen::Index j = 0; j < H.cols(); ++j) t.add(static_cast<long>(i), static_cast<long>(j), std::abs(H(i, j)));
  }
  return t;
}

inline Table block_table(const HessianReport& rep) {
  Table t({"index", "block"});
  for (std::size_t k = 0; k < rep.block_labels.size(); ++k) t.add(k, rep.block_labels[k]);
  return t;
}

// -------------------------------------------------------- projector-spectrum

struct SpectrumResult {
  Eigen::VectorXd kernel;     // eigenvalues of K(0), descending
  ProjectorSpectrum projector;
};

inline SpectrumResult projector_spectrum_study(const ExperimentConfig& c) {
  const ResidualSpec spec = spec_of(c);
  const CollocationSet data = data_of(c, spec);
  const MlpParams net = network_of(c, spec, "projector-spectrum");
  const Eigen::MatrixXd J = assemble_jacobian(net, spec, data);
  SpectrumResult r;
  r.kernel = kernel(J).eigenvalues;
  r.projector = projector_spectrum(J, c.study.rank_tolerance);
  return r;
}

/// Labels: K0 for the kernel, D0 for the assembled projector.
inline Table to_table(const SpectrumResult& r) {
  Table t({"index", "eigenvalue", "label"});
  for (Eigen::Index i = 0; i < r.kernel.size(); ++i) t.add(static_cast<long>(i), r.kernel[i], "K0");
  for (Eigen::Index i = 0; i < r.projector.realized.size(); ++i) t.add(static_cast<long>(i), r.projector.realized[i], "D0");
  return t;
}

// ----------------------------------------------------------------- limit-cov

struct LimitCovRow {
  double x = 0.0;
  double xp = 0.0;
  std::string i;
  std::string j;
  double empirical = 0.0;  // output-layer block of K_Phi, mean over seeds
  double limit = 0.0;      // Gauss-Hermite
};

inline std::vector<LimitCovRow> limit_cov_study(const ExperimentConfig& c, unsigned threads = 1) {
  const ResidualSpec spec = spec_of(c);
  if (spec.d_in != 1) throw ConfigError("pde.name", "limit-cov needs a one-dimensional pde");
  const DerivativeMask mask = spec.mask.closure();
  const std::vector<Component> comps = mask.components();
  const auto& P = c.study.pairs;
  const auto& S = c.study.seeds;
  std::vector<Eigen::MatrixXd> per(P.size() * S.size());
  parallel_for(per.size(), threads, [&](std::size_t k) {
    const MlpParams net = sweep_net(c, spec, "limit-cov", c.study.width, S[k % S.size()]);
    per[k] = phi_kernel_output_block(net, mask, P[k / S.size()][0], P[k / S.size()][1]);
  });
  std::vector<LimitCovRow> rows;
  for (std::size_t p = 0; p < P.size(); ++p) {
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(per[p * S.size()].rows(), per[p * S.size()].cols());
    for (std::size_t s = 0; s < S.size(); ++s) mean += per[p * S.size() + s];
    mean /= static_cast<double>(S.size());
    const Eigen::MatrixXd sigma = limit_covariance(mask, P[p][0], P[p][1], c.study.quadrature_order);
    for (std::size_t a = 0; a < comps.size(); ++a) {
      for (std::size_t b = 0; b < comps.size(); ++b) {
        const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
        rows.push_back({P[p][0], P[p][1], component_name(comps[a]), component_name(comps[b]), mean(ia, ib), sigma(ia, ib)});
      }
    }
  }
  return rows;
}

inline Table to_table(const std::vector<LimitCovRow>& rows) {
  Table t({"x", "xp", "i", "j", "empirical", "limit"});
  for (const auto& r : rows) t.add(r.x, r.xp, r.i, r.j, r.empirical, r.limit);
  return t;
}

// --------------------------------------------------------------------- train

struct TrainResult {
  TrainLog log;
  MlpParams params;
};

template <class Problem>
TrainLog run_optimizer(const OptimizerConfig& o, const Problem& prob, Eigen::VectorXd& theta) {
  if (o.name == "gd") return gd_train(prob, theta, GdOptions{o.eta, o.iterations, o.eval_every});
  if (o.name == "adam") {
    AdamOptions a;
    a.lr = o.lr;
    a.beta1 = o.beta1;
    a.beta2 = o.beta2;
    a.eps = o.eps;
    a.iterations = o.iterations;
    a.wall_budget_ms = o.wall_budget_ms;
    a.eval_every = o.eval_every;
    a.target_rel_l2 = o.target_rel_l2;
    return adam_train(prob, theta, a);
  }
  if (o.name == "lbfgs") {
    LbfgsOptions l;
    l.memory = o.memory;
    l.iterations = o.iterations;
    l.eval_every = o.eval_every;
    l.wall_budget_ms = o.wall_budget_ms;
    return lbfgs_train(prob, theta, l);
  }
  LMState st;
  st.lambda = o.lambda0;
  st.Lambda_max = o.lambda_max;
  st.tol = o.tol;
  st.alpha = o.alpha;
  LmOptions l;
  l.iterations = o.iterations;
  l.geodesic = o.geodesic;
  l.eval_every = o.eval_every;
  l.wall_budget_ms = o.wall_budget_ms;
  l.target_rel_l2 = o.target_rel_l2;
  return lm_train(prob, theta, st, l);
}

/// Problem with the configured pde, collocation set and evaluation grid.
inline PinnProblem problem_of(const ExperimentConfig& c, const MlpParams& net, const ResidualSpec& spec) {
  std::optional<EvalGrid> grid;
  if (spec.has_exact()) grid = make_eval_grid(spec);
  return PinnProblem(net, spec, data_of(c, spec), std::move(grid));
}

/// Trains the configured network; with a curriculum schedule each stage runs
/// the full optimizer budget on the pde with the scheduled parameter value.
inline TrainResult train_study(const ExperimentConfig& c) {
  const ResidualSpec spec = spec_of(c);
  MlpParams net = network_of(c, spec, "train");
  Eigen::VectorXd theta = net.theta;
  TrainResult r;
  if (c.curriculum.schedule.empty()) {
    r.log = run_optimizer(c.optimizer, problem_of(c, net, spec), theta);
  } else {
    auto make = [&](double v) {
      auto params = c.pde.parameters;
      params[c.curriculum.parameter] = v;
      const ResidualSpec sv = make_spec(c.pde.name, params);
      return problem_of(c, net, sv);
    };
    auto run = [&](const PinnProblem& prob, Eigen::VectorXd& th) { return run_optimizer(c.optimizer, prob, th); };
    r.log = curriculum(c.curriculum.schedule, theta, make, run);
  }
  r.params = with_theta(net, theta);
  return r;
}

}  // namespace tangent_kit
