#pragma once

// run(config) writes one artifact directory: config.json (the resolved
// config), the study CSVs and a MANIFEST. reproduce(fig) runs the canned
// desk-scale configs for a figure, one sub-directory per config.

#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "tangent_kit/artifacts.hpp"
#include "tangent_kit/config.hpp"
#include "tangent_kit/studies.hpp"

namespace tangent_kit {

namespace detail {

inline void prepare_output(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".write-test";
  {
    std::ofstream f(probe);
    if (!f) throw std::runtime_error("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

}  // namespace detail

/// Runs one experiment into `dir` (config.output when empty).
inline fs::path run(ExperimentConfig c, fs::path dir = {}, unsigned threads = 1) {
  validate(c);
  if (dir.empty()) dir = c.output;
  c.output = dir.generic_string();
  detail::prepare_output(dir);
  write_text(dir / "config.json", to_json(c).dump(2) + "\n");

  if (c.kind == "train") {
    const TrainResult r = train_study(c);
    write_csv(dir / "train.csv", train_log_table(r.log));
    if (c.optimizer.name == "lm") write_csv(dir / "lm_trace.csv", lm_trace_table(r.log));
    save_params(dir / "params.bin", r.params);
    Json s;
    s["status"] = r.log.status;
    s["iterations"] = r.log.records.empty() ? 0L : r.log.records.back().iter;
    if (!r.log.records.empty()) {
      const TrainRecord& last = r.log.records.back();
      s["loss"] = last.loss;
      s["rel_l2"] = std::isnan(last.rel_l2) ? Json(nullptr) : Json(last.rel_l2);
    }
    write_text(dir / "summary.json", s.dump(2) + "\n");
  } else if (c.kind == "ntk-init") {
    write_csv(dir / "ntk_init.csv", to_table(ntk_init_study(c, threads)));
  } else if (c.kind == "ntk-drift") {
    write_csv(dir / "ntk_drift.csv", to_table(ntk_drift_study(c, threads)));
  } else if (c.kind == "hessian-norm") {
    write_csv(dir / "hessian_norm.csv", to_table(hessian_norm_study(c, threads)));
  } else if (c.kind == "hessian-sparsity") {
    const HessianReport rep = hessian_sparsity_study(c);
    write_csv(dir / ("sparsity_" + c.pde.name + ".csv"), sparsity_table(rep));
    write_csv(dir / ("hessian_blocks_" + c.pde.name + ".csv"), block_table(rep));
  } else if (c.kind == "projector-spectrum") {
    write_csv(dir / "spectrum.csv", to_table(projector_spectrum_study(c)));
  } else if (c.kind == "limit-cov") {
    write_csv(dir / "limit_cov.csv", to_table(limit_cov_study(c, threads)));
  }
  write_manifest(dir);
  return dir;
}

// ------------------------------------------------------------------ canned

struct CannedRun {
  std::string label;  // sub-directory
  ExperimentConfig config;
};

struct Figure {
  std::string id;
  std::string feeds;  // acceptance checks fed by the output
  std::vector<CannedRun> runs;
};

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig1a", "fig1b", "fig2a", "fig2b", "fig3a", "fig3b", "fig4a"};
  return ids;
}

namespace detail {

inline std::vector<int> powers_of_two(int lo, int hi, int stride = 1) {
  std::vector<int> w;
  for (int k = lo; k <= hi; k += stride) w.push_back(1 << k);
  return w;
}

inline ExperimentConfig toy_study(const std::string& kind, const std::string& pde) {
  ExperimentConfig c;
  c.kind = kind;
  c.pde.name = pde;
  c.data.n_r = 20;
  c.data.n_b = 2;
  return c;
}

inline ExperimentConfig burgers_train(const std::string& optimizer) {
  ExperimentConfig c;
  c.kind = "train";
  c.pde.name = "burgers";
  c.network.hidden = {20, 20, 20, 20, 20};
  c.network.init = "xavier";
  c.data.n_r = 10000;
  c.data.n_b = 3000;
  c.optimizer.name = optimizer;
  c.optimizer.iterations = optimizer == "lm" ? 1000 : 20000;
  c.optimizer.eval_every = optimizer == "lm" ? 10 : 100;
  return c;
}

inline ExperimentConfig highfreq_train(const std::string& optimizer, bool rff) {
  ExperimentConfig c;
  c.kind = "train";
  c.pde.name = "poisson_highfreq";
  c.network.hidden = {20, 20, 20, 20, 20};
  c.data.n_r = 1000;
  c.data.n_b = 2;
  c.rff.enabled = rff;
  c.rff.features = 32;
  c.rff.sigma = 10.0;
  c.optimizer.name = optimizer;
  c.optimizer.iterations = optimizer == "lm" ? 1000 : 20000;
  c.optimizer.eval_every = optimizer == "lm" ? 10 : 100;
  return c;
}

inline ExperimentConfig convection_train(double beta, std::vector<double> schedule) {
  ExperimentConfig c;
  c.kind = "train";
  c.pde.name = "convection";
  c.pde.parameters = {{"beta", beta}};
  c.network.hidden = {20, 20, 20, 20, 20};
  c.data.n_r = 1000;
  c.data.n_b = 200;
  c.optimizer.name = "lm";
  c.optimizer.iterations = schedule.empty() ? 5000 : 1000;
  c.optimizer.eval_every = 10;
  c.optimizer.target_rel_l2 = 1e-2;
  c.curriculum.schedule = std::move(schedule);
  return c;
}

}  // namespace detail

inline Figure canned_figure(const std::string& id) {
  using detail::powers_of_two;
  using detail::toy_study;
  Figure f;
  f.id = id;
  const std::vector<std::string> toys{"poisson_toy_linear", "burgers_toy_nonlinear"};
  if (id == "fig1a") {
    f.feeds = "acceptance check 3 (kernel spread at initialization)";
    for (const auto& pde : toys) {
      ExperimentConfig c = toy_study("ntk-init", pde);
      c.study.widths = powers_of_two(4, 13);
      f.runs.push_back({pde, c});
    }
  } else if (id == "fig1b") {
    f.feeds = "acceptance check 4 (kernel drift)";
    for (const auto& pde : toys) {
      ExperimentConfig c = toy_study("ntk-drift", pde);
      c.study.widths = powers_of_two(4, 12, 2);
      f.runs.push_back({pde, c});
    }
  } else if (id == "fig2a") {
    f.feeds = "acceptance check 5 (residual Hessian norm and sparsity)";
    for (const auto& pde : toys) {
      ExperimentConfig c = toy_study("hessian-norm", pde);
      c.study.widths = powers_of_two(4, 12);
      f.runs.push_back({pde + "/norm", c});
      ExperimentConfig s = toy_study("hessian-sparsity", pde);
      s.study.width = 32;
      f.runs.push_back({pde + "/sparsity", s});
    }
  } else if (id == "fig2b") {
    f.feeds = "acceptance check 6 (projector spectrum vs kernel spectrum)";
    ExperimentConfig c;
    c.kind = "projector-spectrum";
    c.pde.name = "burgers";
    c.network.hidden = {20, 20};
    c.data.n_r = 50;
    c.data.n_b = 20;
    f.runs.push_back({"burgers", c});
  } else if (id == "fig3a") {
    f.feeds = "acceptance check 9 (spectral bias on poisson_highfreq)";
    f.runs.push_back({"lm", detail::highfreq_train("lm", false)});
    f.runs.push_back({"lm_rff", detail::highfreq_train("lm", true)});
    f.runs.push_back({"adam", detail::highfreq_train("adam", false)});
  } else if (id == "fig3b") {
    f.feeds = "acceptance check 10 (convection with and without curriculum)";
    f.runs.push_back({"lm_beta30", detail::convection_train(30.0, {})});
    f.runs.push_back({"lm_curriculum_beta50", detail::convection_train(50.0, {10.0, 20.0, 30.0, 40.0, 50.0})});
  } else if (id == "fig4a") {
    f.feeds = "acceptance check 8 (LM vs Adam on burgers)";
    for (const char* o : {"adam", "lbfgs", "lm"}) f.runs.push_back({o, detail::burgers_train(o)});
  } else {
    std::string known;
    for (const auto& k : figure_ids()) known += (known.empty() ? "" : ", ") + k;
    throw std::invalid_argument("unknown figure '" + id + "' (known: " + known + ")");
  }
  for (auto& r : f.runs) validate(r.config);
  return f;
}

/// Runs every canned config of the figure below `dir`, then writes a
/// top-level MANIFEST covering all of them.
inline Figure reproduce(const std::string& id, const fs::path& dir, unsigned threads = 1, std::ostream* progress = nullptr) {
  Figure f = canned_figure(id);
  detail::prepare_output(dir);
  for (const auto& r : f.runs) {
    if (progress) *progress << id << ": " << r.label << " (" << r.config.kind << ", " << r.config.pde.name << ")\n";
    run(r.config, dir / r.label, threads);
  }
  write_manifest(dir);
  return f;
}

}  // namespace tangent_kit
