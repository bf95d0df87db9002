// tangent-kit: train PINNs and run the NTK studies from the command line.
//
//   tangent-kit <kind> [--config file.json] [flags] --out dir
//   tangent-kit reproduce <fig> --out dir
//   tangent-kit list-pdes

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tangent_kit/tangent_kit.hpp"

namespace tk = tangent_kit;

namespace {

struct Flags {
  std::string config_path;
  std::string out;
  std::optional<std::string> pde, optimizer, sampling;
  std::optional<long> iters;
  std::optional<double> beta;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_r, n_b, width;
  std::vector<int> widths, seeds, hidden;
  std::vector<double> schedule;
  bool rff = false;
  std::vector<std::string> sets;
  bool serial = false;
};

void add_experiment_options(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "output directory (overrides the config's 'output')");
  sub->add_option("--pde", f.pde, "pde name");
  sub->add_option("--optimizer", f.optimizer, "lm | adam | lbfgs | gd");
  sub->add_option("--iters", f.iters, "optimizer iterations");
  sub->add_option("--beta", f.beta, "pde parameter beta");
  sub->add_option("--seed", f.seed, "root seed");
  sub->add_option("--n-r", f.n_r, "residual points");
  sub->add_option("--n-b", f.n_b, "boundary points");
  sub->add_option("--sampling", f.sampling, "latin_hypercube | uniform_grid | uniform_random");
  sub->add_option("--hidden", f.hidden, "hidden layer widths")->delimiter(',');
  sub->add_flag("--rff", f.rff, "enable random Fourier features");
  sub->add_option("--curriculum", f.schedule, "curriculum schedule for curriculum.parameter")->delimiter(',');
  sub->add_option("--widths", f.widths, "sweep widths")->delimiter(',');
  sub->add_option("--seeds", f.seeds, "sweep seed indices")->delimiter(',');
  sub->add_option("--width", f.width, "width for hessian-sparsity / limit-cov");
  sub->add_option("--set", f.sets, "override any field: path.to.key=value (repeatable)");
  sub->add_flag("--serial", f.serial, "single thread; reruns are bit-identical");
}

tk::Json load_json(const std::string& path) {
  if (path.empty()) return tk::Json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return tk::Json::object();
  tk::Json j = tk::Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error(path + ": not valid JSON");
  return j;
}

tk::ExperimentConfig resolve(const std::string& kind, const Flags& f) {
  tk::Json j = load_json(f.config_path);
  if (!j.is_object()) throw tk::ConfigError("config", "expected an object");
  j["kind"] = kind;
  if (f.pde) tk::set_path(j, "pde.name", *f.pde);
  if (f.optimizer) tk::set_path(j, "optimizer.name", *f.optimizer);
  if (f.iters) tk::set_path(j, "optimizer.iterations", *f.iters);
  if (f.beta) tk::set_path(j, "pde.parameters.beta", *f.beta);
  if (f.seed) tk::set_path(j, "seed", *f.seed);
  if (f.n_r) tk::set_path(j, "data.n_r", *f.n_r);
  if (f.n_b) tk::set_path(j, "data.n_b", *f.n_b);
  if (f.sampling) tk::set_path(j, "data.sampling", *f.sampling);
  if (!f.hidden.empty()) tk::set_path(j, "network.hidden", f.hidden);
  if (f.rff) tk::set_path(j, "rff.enabled", true);
  if (!f.schedule.empty()) tk::set_path(j, "curriculum.schedule", f.schedule);
  if (!f.widths.empty()) tk::set_path(j, "study.widths", f.widths);
  if (!f.seeds.empty()) tk::set_path(j, "study.seeds", f.seeds);
  if (f.width) tk::set_path(j, "study.width", *f.width);
  for (const auto& s : f.sets) tk::apply_override(j, s);
  if (!f.out.empty()) j["output"] = f.out;
  return tk::config_from_json(j);
}

void list_pdes() {
  for (const auto& name : tk::pde_names()) {
    const tk::ResidualSpec s = tk::make_spec(name);
    std::cout << name << "  d=" << s.d_in << (s.linear() ? "  linear" : "  nonlinear");
    for (const auto& [k, v] : s.parameters) std::cout << "  " << k << "=" << tk::format_real(v);
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PINN training and neural tangent kernel diagnostics"};
  app.require_subcommand(1);

  Flags flags;
  std::vector<std::pair<std::string, CLI::App*>> kinds;
  for (const auto& k : tk::experiment_kinds()) {
    CLI::App* sub = app.add_subcommand(k, "run one " + k + " experiment");
    add_experiment_options(sub, flags);
    kinds.emplace_back(k, sub);
  }

  std::string fig, fig_out = "out";
  bool fig_serial = false;
  CLI::App* rep = app.add_subcommand("reproduce", "run the canned configs of a figure");
  rep->add_option("fig", fig, "fig1a | fig1b | fig2a | fig2b | fig3a | fig3b | fig4a")->required();
  rep->add_option("--out", fig_out, "output directory");
  rep->add_flag("--serial", fig_serial, "single thread");

  CLI::App* lp = app.add_subcommand("list-pdes", "list the available pdes and their default parameters");

  CLI11_PARSE(app, argc, argv);

  try {
    if (lp->parsed()) {
      list_pdes();
      return 0;
    }
    if (rep->parsed()) {
      const tk::Figure f = tk::reproduce(fig, fig_out, tk::resolve_threads(fig_serial), &std::cerr);
      std::cout << fig_out << "\n" << f.id << " feeds " << f.feeds << "\n";
      return 0;
    }
    for (const auto& [kind, sub] : kinds) {
      if (!sub->parsed()) continue;
      const tk::ExperimentConfig cfg = resolve(kind, flags);
      const auto dir = tk::run(cfg, cfg.output, tk::resolve_threads(flags.serial));
      std::cout << dir.generic_string() << "\n";
    }
  } catch (const tk::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
