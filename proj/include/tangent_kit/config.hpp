#pragma once

// Experiment configuration. Parsed from JSON with every key checked against
// the known schema; errors name the offending field path, e.g.
// "pde.parameters.beta: must be positive".

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "tangent_kit/net.hpp"
#include "tangent_kit/pde.hpp"

namespace tangent_kit {

using Json = nlohmann::ordered_json;

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::invalid_argument(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"train",          "ntk-init",          "ntk-drift", "hessian-norm",
                                          "hessian-sparsity", "projector-spectrum", "limit-cov"};
  return k;
}

struct PdeConfig {
  std::string name = "poisson_toy_linear";
  std::map<std::string, double> parameters;
};

struct NetworkConfig {
  std::vector<int> hidden{20, 20, 20, 20, 20};
  std::string init = "xavier";  // xavier | gaussian
  std::string scaling = "standard";
};

struct RffConfig {
  bool enabled = false;
  int features = 64;
  double sigma = 1.0;
};

struct OptimizerConfig {
  std::string name = "lm";  // lm | adam | lbfgs | gd
  long iterations = 1000;
  long eval_every = 10;
  double wall_budget_ms = 0.0;
  double target_rel_l2 = 0.0;
  // adam
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // gd
  double eta = 1e-3;
  // lbfgs
  int memory = 10;
  // lm
  double lambda0 = 1e-2;
  double lambda_max = 1e10;
  double tol = 1e-3;
  double alpha = 0.75;
  bool geodesic = true;
};

struct CurriculumConfig {
  std::string parameter = "beta";
  std::vector<double> schedule;  // empty: no curriculum
};

struct DataConfig {
  int n_r = 1000;
  int n_b = 100;
  std::string sampling = "latin_hypercube";
};

struct StudyConfig {
  std::vector<int> widths{16, 64, 256, 1024, 4096, 8192};
  std::vector<int> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int width = 32;  // hessian-sparsity, limit-cov
  int steps = 200;
  double eta = 1e-3;
  int record_every = 20;
  std::vector<std::vector<double>> pairs{{0.1, 0.1}, {0.25, 0.75}, {0.5, 0.5}, {0.9, 0.3}, {0.0, 1.0}};
  int quadrature_order = 64;
  double rank_tolerance = 1e-10;
};

struct ExperimentConfig {
  std::string kind = "train";
  std::uint64_t seed = 0;
  std::string output = "out";
  PdeConfig pde;
  NetworkConfig network;
  RffConfig rff;
  OptimizerConfig optimizer;
  CurriculumConfig curriculum;
  DataConfig data;
  StudyConfig study;
};

namespace detail {

// Walks one JSON object, consuming known keys and rejecting the rest.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label(), "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const std::string& key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(at(key), "expected a boolean");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, double& out) {
    if (const Json* v = find(key)) out = number(*v, at(key));
  }
  void get(const std::string& key, int& out) {
    if (const Json* v = find(key)) out = static_cast<int>(integer(*v, at(key), -2147483647LL, 2147483647LL));
  }
  void get(const std::string& key, long& out) {
    if (const Json* v = find(key)) out = static_cast<long>(integer(*v, at(key), -(1LL << 53), 1LL << 53));
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (const Json* v = find(key)) {
      if (v->is_number_unsigned()) {
        out = v->get<std::uint64_t>();
      } else {
        out = static_cast<std::uint64_t>(integer(*v, at(key), 0, 1LL << 53));
      }
    }
  }
  void get(const std::string& key, std::vector<int>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(at(key), "expected an array");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        out.push_back(static_cast<int>(integer((*v)[i], at(key) + "[" + std::to_string(i) + "]", -2147483647LL, 2147483647LL)));
      }
    }
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(at(key), "expected an array");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) out.push_back(number((*v)[i], at(key) + "[" + std::to_string(i) + "]"));
    }
  }
  void get(const std::string& key, std::map<std::string, double>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_object()) throw ConfigError(at(key), "expected an object");
      out.clear();
      for (auto it = v->begin(); it != v->end(); ++it) out[it.key()] = number(it.value(), at(key) + "." + it.key());
    }
  }

  ObjectReader child(const std::string& key, const Json& empty) {
    const Json* v = find(key);
    return ObjectReader(v ? *v : empty, at(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
    }
  }

  static double number(const Json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
  }
  static long long integer(const Json& v, const std::string& path, long long lo, long long hi) {
    if (v.is_number_integer()) {
      const long long x = v.get<long long>();
      if (x < lo || x > hi) throw ConfigError(path, "integer out of range");
      return x;
    }
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == std::floor(d) && d >= static_cast<double>(lo) && d <= static_cast<double>(hi)) return static_cast<long long>(d);
    }
    throw ConfigError(path, "expected an integer");
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

inline bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  for (const char* o : options) {
    if (v == o) return true;
  }
  return false;
}

}  // namespace detail

/// Range checks; also resolves pde parameters to the spec's full set.
inline void validate(ExperimentConfig& c) {
  using detail::require;
  bool known = false;
  for (const auto& k : experiment_kinds()) known = known || k == c.kind;
  require(known, "kind", "unknown experiment kind '" + c.kind + "'");
  require(!c.output.empty(), "output", "must not be empty");

  bool pde_known = false;
  for (const auto& n : pde_names()) pde_known = pde_known || n == c.pde.name;
  require(pde_known, "pde.name", "unknown pde '" + c.pde.name + "'");
  try {
    c.pde.parameters = make_spec(c.pde.name, c.pde.parameters).parameters;
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (msg.rfind("pde.parameters.", 0) == 0 && colon != std::string::npos) {
      throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
    }
    throw ConfigError("pde.parameters", msg);
  }

  require(!c.network.hidden.empty(), "network.hidden", "needs at least one hidden layer");
  for (std::size_t i = 0; i < c.network.hidden.size(); ++i) {
    require(c.network.hidden[i] >= 1, "network.hidden[" + std::to_string(i) + "]", "width must be positive");
  }
  require(detail::one_of(c.network.init, {"xavier", "gaussian"}), "network.init", "expected 'xavier' or 'gaussian'");
  require(detail::one_of(c.network.scaling, {"ntk", "standard"}), "network.scaling", "expected 'ntk' or 'standard'");

  require(c.rff.features >= 1, "rff.features", "must be positive");
  require(c.rff.sigma > 0.0, "rff.sigma", "must be positive");

  const OptimizerConfig& o = c.optimizer;
  require(detail::one_of(o.name, {"lm", "adam", "lbfgs", "gd"}), "optimizer.name", "expected lm, adam, lbfgs or gd");
  require(o.iterations >= 1, "optimizer.iterations", "must be at least 1");
  require(o.eval_every >= 0, "optimizer.eval_every", "must be non-negative");
  require(o.wall_budget_ms >= 0.0, "optimizer.wall_budget_ms", "must be non-negative");
  require(o.target_rel_l2 >= 0.0, "optimizer.target_rel_l2", "must be non-negative");
  require(o.lr > 0.0, "optimizer.lr", "must be positive");
  require(o.beta1 >= 0.0 && o.beta1 < 1.0, "optimizer.beta1", "must lie in [0, 1)");
  require(o.beta2 >= 0.0 && o.beta2 < 1.0, "optimizer.beta2", "must lie in [0, 1)");
  require(o.eps > 0.0, "optimizer.eps", "must be positive");
  require(o.eta > 0.0, "optimizer.eta", "must be positive");
  require(o.memory >= 1, "optimizer.memory", "must be at least 1");
  require(o.lambda_max > 0.0, "optimizer.lambda_max", "must be positive");
  require(o.lambda0 > 0.0 && o.lambda0 <= o.lambda_max, "optimizer.lambda0", "must lie in (0, lambda_max]");
  require(o.tol >= 0.0 && o.tol < 0.25, "optimizer.tol", "must lie in [0, 1/4)");
  require(o.alpha >= 0.0 && o.alpha < 1.0, "optimizer.alpha", "must lie in [0, 1)");

  for (std::size_t i = 1; i < c.curriculum.schedule.size(); ++i) {
    require(c.curriculum.schedule[i] > c.curriculum.schedule[i - 1], "curriculum.schedule", "must be ascending");
  }
  if (!c.curriculum.schedule.empty()) {
    require(c.pde.parameters.count(c.curriculum.parameter) > 0, "curriculum.parameter",
            "'" + c.curriculum.parameter + "' is not a parameter of " + c.pde.name);
    for (double v : c.curriculum.schedule) {
      auto p = c.pde.parameters;
      p[c.curriculum.parameter] = v;
      try {
        make_spec(c.pde.name, p);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("curriculum.schedule", e.what());
      }
    }
  }

  require(c.data.n_r >= 1, "data.n_r", "must be at least 1");
  require(c.data.n_b >= 1, "data.n_b", "must be at least 1");
  try {
    parse_sampling(c.data.sampling);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("data.sampling", e.what());
  }

  const StudyConfig& s = c.study;
  require(!s.widths.empty(), "study.widths", "must not be empty");
  for (std::size_t i = 0; i < s.widths.size(); ++i) {
    require(s.widths[i] >= 1, "study.widths[" + std::to_string(i) + "]", "width must be positive");
    if (i > 0) require(s.widths[i] > s.widths[i - 1], "study.widths", "must be ascending");
  }
  require(!s.seeds.empty(), "study.seeds", "must not be empty");
  for (std::size_t i = 0; i < s.seeds.size(); ++i) {
    require(s.seeds[i] >= 0, "study.seeds[" + std::to_string(i) + "]", "must be non-negative");
  }
  require(s.width >= 1, "study.width", "must be positive");
  require(s.steps >= 1, "study.steps", "must be at least 1");
  require(s.eta > 0.0, "study.eta", "must be positive");
  require(s.record_every >= 1, "study.record_every", "must be at least 1");
  for (std::size_t i = 0; i < s.pairs.size(); ++i) {
    require(s.pairs[i].size() == 2, "study.pairs[" + std::to_string(i) + "]", "expected [x, x']");
  }
  require(s.quadrature_order >= 8, "study.quadrature_order", "must be at least 8");
  require(s.rank_tolerance > 0.0 && s.rank_tolerance < 1.0, "study.rank_tolerance", "must lie in (0, 1)");
}

/// Parses and validates. Absent keys keep their defaults.
inline ExperimentConfig config_from_json(const Json& j) {
  const Json empty = Json::object();
  ExperimentConfig c;
  detail::ObjectReader r(j.is_null() ? empty : j, "");
  r.get("kind", c.kind);
  r.get("seed", c.seed);
  r.get("output", c.output);
  {
    auto p = r.child("pde", empty);
    p.get("name", c.pde.name);
    p.get("parameters", c.pde.parameters);
    p.finish();
  }
  {
    auto n = r.child("network", empty);
    n.get("hidden", c.network.hidden);
    n.get("init", c.network.init);
    n.get("scaling", c.network.scaling);
    n.finish();
  }
  {
    auto f = r.child("rff", empty);
    f.get("enabled", c.rff.enabled);
    f.get("features", c.rff.features);
    f.get("sigma", c.rff.sigma);
    f.finish();
  }
  {
    auto o = r.child("optimizer", empty);
    OptimizerConfig& x = c.optimizer;
    o.get("name", x.name);
    o.get("iterations", x.iterations);
    o.get("eval_every", x.eval_every);
    o.get("wall_budget_ms", x.wall_budget_ms);
    o.get("target_rel_l2", x.target_rel_l2);
    o.get("lr", x.lr);
    o.get("beta1", x.beta1);
    o.get("beta2", x.beta2);
    o.get("eps", x.eps);
    o.get("eta", x.eta);
    o.get("memory", x.memory);
    o.get("lambda0", x.lambda0);
    o.get("lambda_max", x.lambda_max);
    o.get("tol", x.tol);
    o.get("alpha", x.alpha);
    o.get("geodesic", x.geodesic);
    o.finish();
  }
  {
    auto cu = r.child("curriculum", empty);
    cu.get("parameter", c.curriculum.parameter);
    cu.get("schedule", c.curriculum.schedule);
    cu.finish();
  }
  {
    auto d = r.child("data", empty);
    d.get("n_r", c.data.n_r);
    d.get("n_b", c.data.n_b);
    d.get("sampling", c.data.sampling);
    d.finish();
  }
  {
    auto s = r.child("study", empty);
    StudyConfig& x = c.study;
    s.get("widths", x.widths);
    s.get("seeds", x.seeds);
    s.get("width", x.width);
    s.get("steps", x.steps);
    s.get("eta", x.eta);
    s.get("record_every", x.record_every);
    if (const Json* v = s.find("pairs")) {
      if (!v->is_array()) throw ConfigError("study.pairs", "expected an array");
      x.pairs.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const std::string path = "study.pairs[" + std::to_string(i) + "]";
        const Json& e = (*v)[i];
        if (!e.is_array() || e.size() != 2) throw ConfigError(path, "expected [x, x']");
        x.pairs.push_back({detail::ObjectReader::number(e[0], path + "[0]"), detail::ObjectReader::number(e[1], path + "[1]")});
      }
    }
    s.get("quadrature_order", x.quadrature_order);
    s.get("rank_tolerance", x.rank_tolerance);
    s.finish();
  }
  r.finish();
  validate(c);
  return c;
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["kind"] = c.kind;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["pde"]["name"] = c.pde.name;
  j["pde"]["parameters"] = Json::object();
  for (const auto& [k, v] : c.pde.parameters) j["pde"]["parameters"][k] = v;
  j["network"] = {{"hidden", c.network.hidden}, {"init", c.network.init}, {"scaling", c.network.scaling}};
  j["rff"] = {{"enabled", c.rff.enabled}, {"features", c.rff.features}, {"sigma", c.rff.sigma}};
  const OptimizerConfig& o = c.optimizer;
  j["optimizer"] = {{"name", o.name},       {"iterations", o.iterations}, {"eval_every", o.eval_every},
                    {"wall_budget_ms", o.wall_budget_ms}, {"target_rel_l2", o.target_rel_l2},
                    {"lr", o.lr},           {"beta1", o.beta1},           {"beta2", o.beta2},
                    {"eps", o.eps},         {"eta", o.eta},               {"memory", o.memory},
                    {"lambda0", o.lambda0}, {"lambda_max", o.lambda_max}, {"tol", o.tol},
                    {"alpha", o.alpha},     {"geodesic", o.geodesic}};
  j["curriculum"] = {{"parameter", c.curriculum.parameter}, {"schedule", c.curriculum.schedule}};
  j["data"] = {{"n_r", c.data.n_r}, {"n_b", c.data.n_b}, {"sampling", c.data.sampling}};
  const StudyConfig& s = c.study;
  j["study"] = {{"widths", s.widths},
                {"seeds", s.seeds},
                {"width", s.width},
                {"steps", s.steps},
                {"eta", s.eta},
                {"record_every", s.record_every},
                {"pairs", s.pairs},
                {"quadrature_order", s.quadrature_order},
                {"rank_tolerance", s.rank_tolerance}};
  return j;
}

/// Sets a dotted path ("optimizer.iterations", "pde.parameters.beta") in a
/// JSON document, creating intermediate objects.
inline void set_path(Json& j, const std::string& path, Json value) {
  if (path.empty()) throw ConfigError("config", "empty override path");
  Json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError(path, "malformed override path");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError(path.substr(0, start ? start - 1 : 0), "expected an object");
      *node = Json::object();
    }
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

/// "key.path=value" with value read as JSON when it parses, else as a string.
inline void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(assignment, "override must look like path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_path(j, path, std::move(value));
}

}  // namespace tangent_kit
