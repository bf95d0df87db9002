#pragma once

// Benchmark PDEs, collocation sampling and the discrete PINN loss.
//
// Every residual is a quadratic form in the jet components,
//   R(z) = lin . z + 1/2 z^T Q z - f(x),
// which covers all shipped equations exactly. Boundary data are rows of the
// form sum_k coef_k * component_k(point_k) - target, with at most two terms,
// so Dirichlet values, initial velocities and periodic pairs share one path.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tangent_kit/burgers_exact.hpp"
#include "tangent_kit/jets.hpp"
#include "tangent_kit/net.hpp"
#include "tangent_kit/rng.hpp"

namespace tangent_kit {

using PointSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Point = std::array<double, kMaxDim>;
using PhiMatrix = Eigen::Matrix<double, kComponents, kComponents>;

inline std::span<const double> row_span(const PointSet& p, Eigen::Index i) {
  return {p.data() + i * p.cols(), static_cast<std::size_t>(p.cols())};
}

inline ComponentWeights<double> phi_of(const SpatialJet<double>& jet) {
  ComponentWeights<double> z{};
  for (Component c : kAllComponents) z[index_of(c)] = jet[c];
  return z;
}

struct Box {
  Point lo{};
  Point hi{};
};

/// One boundary face. In one dimension a face is a single point; in two it is
/// the segment where coordinate `fixed_coord` equals `fixed_value`.
struct Face {
  std::string name;
  int fixed_coord = 0;
  double fixed_value = 0.0;
  Component component = Component::value;
  double coef = 1.0;
  // periodic pair: the same row also carries pair_coef * component(pair point)
  std::optional<double> pair_value;
  double pair_coef = -1.0;
  std::function<double(std::span<const double>)> target;
  // extra penalty rows share the boundary weight but do not count toward N_b
  bool extra = false;
};

struct BoundaryRow {
  Point point{};
  Component component = Component::value;
  double coef = 1.0;
  bool paired = false;
  Point pair_point{};
  double pair_coef = -1.0;
  double target = 0.0;
  bool extra = false;
  int face = 0;
};

enum class Sampling { latin_hypercube, uniform_grid, uniform_random };

inline std::string to_string(Sampling s) {
  switch (s) {
    case Sampling::latin_hypercube: return "latin_hypercube";
    case Sampling::uniform_grid: return "uniform_grid";
    case Sampling::uniform_random: return "uniform_random";
  }
  return "?";
}

inline Sampling parse_sampling(const std::string& s) {
  if (s == "latin_hypercube") return Sampling::latin_hypercube;
  if (s == "uniform_grid") return Sampling::uniform_grid;
  if (s == "uniform_random") return Sampling::uniform_random;
  throw std::invalid_argument("unknown sampling strategy '" + s + "'");
}

struct CollocationSet {
  PointSet residual;
  std::vector<BoundaryRow> boundary;
  Sampling strategy = Sampling::latin_hypercube;
  std::uint64_t seed = 0;

  int n_r() const { return static_cast<int>(residual.rows()); }
  int n_b_rows() const { return static_cast<int>(boundary.size()); }
  /// Boundary count used for the 1/(2 N_b) weight.
  int n_b() const {
    int n = 0;
    for (const auto& b : boundary) n += b.extra ? 0 : 1;
    return std::max(n, 1);
  }
  int rows() const { return n_b_rows() + n_r(); }
};

struct ResidualSpec {
  std::string name;
  int d_in = 1;
  Box domain;
  DerivativeMask mask;
  ComponentWeights<double> lin{};
  PhiMatrix Q = PhiMatrix::Zero();
  std::function<double(std::span<const double>)> forcing = [](std::span<const double>) { return 0.0; };
  std::vector<Face> faces;
  std::function<SpatialJet<double>(std::span<const double>)> exact;
  std::map<std::string, double> parameters;

  bool linear() const { return Q.isZero(0.0); }
  bool has_exact() const { return static_cast<bool>(exact); }

  /// R without forcing.
  double R(const ComponentWeights<double>& z) const {
    double r = 0.0;
    for (int i = 0; i < kComponents; ++i) r += lin[i] * z[i];
    for (int i = 0; i < kComponents; ++i) {
      for (int j = 0; j < kComponents; ++j) r += 0.5 * Q(i, j) * z[i] * z[j];
    }
    return r;
  }

  ComponentWeights<double> gradR(const ComponentWeights<double>& z) const {
    ComponentWeights<double> g = lin;
    for (int i = 0; i < kComponents; ++i) {
      for (int j = 0; j < kComponents; ++j) g[i] += Q(i, j) * z[j];
    }
    return g;
  }

  const PhiMatrix& hessR() const { return Q; }

  /// Mask needed to evaluate both the residual and all boundary rows.
  DerivativeMask evaluation_mask() const {
    DerivativeMask m = mask;
    for (const auto& f : faces) m.set(f.component);
    return m.closure();
  }

  double exact_value(std::span<const double> p) const {
    if (!exact) throw std::logic_error("spec '" + name + "' has no exact solution");
    return exact(p).value;
  }
};

inline std::vector<std::string> pde_names() {
  return {"poisson_toy_linear", "burgers_toy_nonlinear", "poisson_highfreq", "convection", "wave", "burgers"};
}

namespace detail {

inline double take_param(std::map<std::string, double>& given, const std::string& key, double fallback) {
  auto it = given.find(key);
  if (it == given.end()) return fallback;
  const double v = it->second;
  given.erase(it);
  return v;
}

inline void reject_leftovers(const std::string& spec, const std::map<std::string, double>& given) {
  if (!given.empty()) {
    throw std::invalid_argument("pde.parameters." + given.begin()->first + ": unknown parameter for '" + spec + "'");
  }
}

inline void require_positive(const std::string& key, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument("pde.parameters." + key + ": must be positive");
  }
}

inline Face point_face(std::string name, double x, std::function<double(std::span<const double>)> target) {
  Face f;
  f.name = std::move(name);
  f.fixed_coord = 0;
  f.fixed_value = x;
  f.target = std::move(target);
  return f;
}

inline Face segment_face(std::string name, int fixed_coord, double value,
                         std::function<double(std::span<const double>)> target) {
  Face f;
  f.name = std::move(name);
  f.fixed_coord = fixed_coord;
  f.fixed_value = value;
  f.target = std::move(target);
  return f;
}

inline std::function<double(std::span<const double>)> zero_target() {
  return [](std::span<const double>) { return 0.0; };
}

inline std::function<double(std::span<const double>)> exact_target(
    const std::function<SpatialJet<double>(std::span<const double>)>& exact) {
  return [exact](std::span<const double> p) { return exact(p).value; };
}

inline SpatialJet<double> jet1(double v, double d, double dd) {
  SpatialJet<double> j;
  j.dim = 1;
  j.value = v;
  j.grad[0] = d;
  j.hess[0] = dd;
  return j;
}

}  // namespace detail

/// Builds a shipped spec. Unknown names or parameters throw.
inline ResidualSpec make_spec(const std::string& name, std::map<std::string, double> params = {}) {
  using namespace detail;
  constexpr double pi = std::numbers::pi;
  ResidualSpec s;
  s.name = name;

  if (name == "poisson_toy_linear" || name == "burgers_toy_nonlinear") {
    reject_leftovers(name, params);
    s.d_in = 1;
    s.domain = {{0.0, 0.0}, {1.0, 0.0}};
    const double k = 4.0 / pi;
    s.forcing = [k](std::span<const double> p) { return k * k * std::sin(k * p[0]); };
    if (name == "poisson_toy_linear") {
      s.mask = DerivativeMask::of({Component::d00});
      s.lin[index_of(Component::d00)] = 1.0;
      s.exact = [k](std::span<const double> p) {
        const double a = k * p[0];
        return jet1(-std::sin(a), -k * std::cos(a), k * k * std::sin(a));
      };
    } else {
      s.mask = DerivativeMask::of({Component::value, Component::d0});
      s.Q(index_of(Component::value), index_of(Component::d0)) = 1.0;
      s.Q(index_of(Component::d0), index_of(Component::value)) = 1.0;
      // u^2 = 1 + 2k(1 - cos(kx)) solves u u_x = k^2 sin(kx) with u(0) = 1.
      s.exact = [k](std::span<const double> p) {
        const double a = k * p[0];
        const double u = std::sqrt(1.0 + 2.0 * k * (1.0 - std::cos(a)));
        const double ux = k * k * std::sin(a) / u;
        const double uxx = (k * k * k * std::cos(a) - ux * ux) / u;
        return jet1(u, ux, uxx);
      };
    }
    s.faces.push_back(point_face("x=0", 0.0, exact_target(s.exact)));
    s.faces.push_back(point_face("x=1", 1.0, exact_target(s.exact)));
    return s;
  }

  if (name == "poisson_highfreq") {
    const double lo = take_param(params, "freq_low", 1.0);
    const double hi = take_param(params, "freq_high", 25.0);
    const double amp = take_param(params, "amplitude", 0.1);
    reject_leftovers(name, params);
    require_positive("freq_low", lo);
    require_positive("freq_high", hi);
    s.parameters = {{"freq_low", lo}, {"freq_high", hi}, {"amplitude", amp}};
    s.d_in = 1;
    s.domain = {{0.0, 0.0}, {1.0, 0.0}};
    s.mask = DerivativeMask::of({Component::d00});
    s.lin[index_of(Component::d00)] = 1.0;
    const double a = 2.0 * pi * lo;
    const double b = 2.0 * pi * hi;
    s.exact = [a, b, amp](std::span<const double> p) {
      const double x = p[0];
      return jet1(std::sin(a * x) + amp * std::sin(b * x), a * std::cos(a * x) + amp * b * std::cos(b * x),
                  -a * a * std::sin(a * x) - amp * b * b * std::sin(b * x));
    };
    s.forcing = [ex = s.exact](std::span<const double> p) { return ex(p).hess[0]; };
    s.faces.push_back(point_face("x=0", 0.0, zero_target()));
    s.faces.push_back(point_face("x=1", 1.0, zero_target()));
    return s;
  }

  if (name == "convection") {
    const double beta = take_param(params, "beta", 30.0);
    reject_leftovers(name, params);
    require_positive("beta", beta);
    s.parameters = {{"beta", beta}};
    s.d_in = 2;
    s.domain = {{0.0, 0.0}, {2.0 * pi, 1.0}};
    s.mask = DerivativeMask::of({Component::d0, Component::d1});
    s.lin[index_of(Component::d1)] = 1.0;
    s.lin[index_of(Component::d0)] = beta;
    s.exact = [beta](std::span<const double> p) {
      const double a = p[0] - beta * p[1];
      const double sn = std::sin(a), cs = std::cos(a);
      SpatialJet<double> j;
      j.dim = 2;
      j.value = sn;
      j.grad = {cs, -beta * cs};
      j.hess = {-sn, beta * sn, -beta * beta * sn};
      return j;
    };
    s.faces.push_back(segment_face("t=0", 1, 0.0, [](std::span<const double> p) { return std::sin(p[0]); }));
    Face periodic = segment_face("x=0~x=2pi", 0, 0.0, zero_target());
    periodic.pair_value = 2.0 * pi;
    periodic.pair_coef = -1.0;
    s.faces.push_back(periodic);
    return s;
  }

  if (name == "wave") {
    const double c = take_param(params, "C", 2.0);
    const double hyperbolic = take_param(params, "hyperbolic", 0.0);
    reject_leftovers(name, params);
    require_positive("C", c);
    if (hyperbolic != 0.0 && hyperbolic != 1.0) throw std::invalid_argument("pde.parameters.hyperbolic: must be 0 or 1");
    s.parameters = {{"C", c}, {"hyperbolic", hyperbolic}};
    s.d_in = 2;
    s.domain = {{0.0, 0.0}, {1.0, 1.0}};
    s.mask = DerivativeMask::of({Component::d00, Component::d11});
    // As printed: u_tt = -C^2 u_xx. hyperbolic=1 selects u_tt = C^2 u_xx.
    s.lin[index_of(Component::d11)] = 1.0;
    s.lin[index_of(Component::d00)] = hyperbolic == 1.0 ? -c * c : c * c;
    s.exact = [](std::span<const double> p) {
      const double x = p[0], t = p[1];
      const double s1 = std::sin(pi * x), c1 = std::cos(pi * x);
      const double s4 = std::sin(4 * pi * x), c4 = std::cos(4 * pi * x);
      const double ct2 = std::cos(2 * pi * t), st2 = std::sin(2 * pi * t);
      const double ct8 = std::cos(8 * pi * t), st8 = std::sin(8 * pi * t);
      SpatialJet<double> j;
      j.dim = 2;
      j.value = s1 * ct2 + 0.5 * s4 * ct8;
      j.grad[0] = pi * c1 * ct2 + 2.0 * pi * c4 * ct8;
      j.grad[1] = -2.0 * pi * s1 * st2 - 4.0 * pi * s4 * st8;
      j.hess[0] = -pi * pi * s1 * ct2 - 8.0 * pi * pi * s4 * ct8;
      j.hess[1] = -2.0 * pi * pi * c1 * st2 - 16.0 * pi * pi * c4 * st8;
      j.hess[2] = -4.0 * pi * pi * s1 * ct2 - 32.0 * pi * pi * s4 * ct8;
      return j;
    };
    s.faces.push_back(segment_face("t=0", 1, 0.0, [](std::span<const double> p) {
      return std::sin(pi * p[0]) + 0.5 * std::sin(4 * pi * p[0]);
    }));
    Face velocity = segment_face("u_t(t=0)", 1, 0.0, zero_target());
    velocity.component = Component::d1;
    velocity.extra = true;
    s.faces.push_back(velocity);
    s.faces.push_back(segment_face("x=0", 0, 0.0, zero_target()));
    s.faces.push_back(segment_face("x=1", 0, 1.0, zero_target()));
    return s;
  }

  if (name == "burgers") {
    const double nu = take_param(params, "nu", 0.01 / pi);
    reject_leftovers(name, params);
    require_positive("nu", nu);
    s.parameters = {{"nu", nu}};
    s.d_in = 2;
    s.domain = {{-1.0, 0.0}, {1.0, 1.0}};
    s.mask = DerivativeMask::of({Component::value, Component::d1, Component::d0, Component::d00});
    s.lin[index_of(Component::d1)] = 1.0;
    s.lin[index_of(Component::d00)] = -nu;
    s.Q(index_of(Component::value), index_of(Component::d0)) = 1.0;
    s.Q(index_of(Component::d0), index_of(Component::value)) = 1.0;
    auto ref = std::make_shared<BurgersExact>(nu);
    s.exact = [ref](std::span<const double> p) { return ref->jet(p); };
    s.faces.push_back(segment_face("t=0", 1, 0.0, [](std::span<const double> p) { return -std::sin(pi * p[0]); }));
    s.faces.push_back(segment_face("x=-1", 0, -1.0, zero_target()));
    s.faces.push_back(segment_face("x=1", 0, 1.0, zero_target()));
    return s;
  }

  throw std::invalid_argument("unknown pde '" + name + "'");
}

/// r = R(Phi) - f(point).
inline double residual(const ResidualSpec& spec, const SpatialJet<double>& jet, std::span<const double> point) {
  if (jet.dim != spec.d_in || static_cast<int>(point.size()) != spec.d_in) {
    throw std::invalid_argument("residual: jet or point dimension differs from spec");
  }
  return spec.R(phi_of(jet)) - spec.forcing(point);
}

inline ComponentSelector residual_phi_gradient(const ResidualSpec& spec, const SpatialJet<double>& jet) {
  return spec.gradR(phi_of(jet));
}

namespace detail {

inline std::vector<double> sample_axis(int n, double lo, double hi, Sampling strategy, Rng& rng) {
  std::vector<double> out(static_cast<std::size_t>(n));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    double u = 0.5;
    if (strategy == Sampling::uniform_grid) {
      u = (i + 0.5) / n;
    } else if (strategy == Sampling::latin_hypercube) {
      u = (i + unif(rng)) / n;
    } else {
      u = unif(rng);
    }
    out[static_cast<std::size_t>(i)] = lo + (hi - lo) * u;
  }
  return out;
}

}  // namespace detail

/// Residual points and boundary rows. 1D specs get one row per endpoint
/// regardless of n_b; 2D specs split n_b evenly over the non-extra faces, and
/// each extra face repeats the points of the face listed before it.
inline CollocationSet sample(const ResidualSpec& spec, int n_r, int n_b, Sampling strategy, std::uint64_t seed) {
  if (n_r < 1 || n_b < 1) throw std::invalid_argument("sample: N_r and N_b must be at least 1");
  CollocationSet set;
  set.strategy = strategy;
  set.seed = seed;
  Rng rng(seed);
  const int d = spec.d_in;
  set.residual.resize(n_r, d);

  if (d == 1) {
    auto xs = detail::sample_axis(n_r, spec.domain.lo[0], spec.domain.hi[0], strategy, rng);
    for (int i = 0; i < n_r; ++i) set.residual(i, 0) = xs[static_cast<std::size_t>(i)];
  } else if (strategy == Sampling::uniform_grid) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_r))));
    if (side * side != n_r) throw std::invalid_argument("sample: 2D uniform_grid needs a square N_r");
    auto xs = detail::sample_axis(side, spec.domain.lo[0], spec.domain.hi[0], strategy, rng);
    auto ts = detail::sample_axis(side, spec.domain.lo[1], spec.domain.hi[1], strategy, rng);
    for (int i = 0; i < side; ++i) {
      for (int j = 0; j < side; ++j) {
        set.residual(i * side + j, 0) = xs[static_cast<std::size_t>(i)];
        set.residual(i * side + j, 1) = ts[static_cast<std::size_t>(j)];
      }
    }
  } else {
    for (int a = 0; a < d; ++a) {
      auto v = detail::sample_axis(n_r, spec.domain.lo[a], spec.domain.hi[a], strategy, rng);
      if (strategy == Sampling::latin_hypercube) std::shuffle(v.begin(), v.end(), rng);
      for (int i = 0; i < n_r; ++i) set.residual(i, a) = v[static_cast<std::size_t>(i)];
    }
  }

  int regular = 0;
  for (const auto& f : spec.faces) regular += f.extra ? 0 : 1;
  std::vector<Point> previous;
  int regular_seen = 0;
  for (std::size_t fi = 0; fi < spec.faces.size(); ++fi) {
    const Face& face = spec.faces[fi];
    std::vector<Point> pts;
    if (d == 1) {
      pts.push_back({face.fixed_value, 0.0});
    } else if (face.extra) {
      pts = previous;
    } else {
      const int count = n_b / regular + (regular_seen < n_b % regular ? 1 : 0);
      ++regular_seen;
      const int vary = 1 - face.fixed_coord;
      auto v = detail::sample_axis(std::max(count, 1), spec.domain.lo[vary], spec.domain.hi[vary], strategy, rng);
      if (strategy == Sampling::latin_hypercube) std::shuffle(v.begin(), v.end(), rng);
      for (double x : v) {
        Point p{};
        p[face.fixed_coord] = face.fixed_value;
        p[vary] = x;
        pts.push_back(p);
      }
    }
    for (const Point& p : pts) {
      BoundaryRow row;
      row.point = p;
      row.component = face.component;
      row.coef = face.coef;
      row.extra = face.extra;
      row.face = static_cast<int>(fi);
      if (face.pair_value) {
        row.paired = true;
        row.pair_point = p;
        row.pair_point[face.fixed_coord] = *face.pair_value;
        row.pair_coef = face.pair_coef;
      }
      row.target = face.target(std::span<const double>(p.data(), static_cast<std::size_t>(d)));
      set.boundary.push_back(row);
    }
    previous = std::move(pts);
  }
  return set;
}

/// Residual points plus explicit boundary rows, e.g. for hand-built tests.
inline CollocationSet make_collocation(PointSet residual, std::vector<BoundaryRow> boundary) {
  CollocationSet set;
  set.residual = std::move(residual);
  set.boundary = std::move(boundary);
  return set;
}

struct LossTerms {
  double total = 0.0;
  double boundary = 0.0;
  double residual = 0.0;
};

inline double boundary_value(const MlpParams& params, const ResidualSpec& spec, const BoundaryRow& row) {
  const DerivativeMask m = DerivativeMask::of({row.component}).closure();
  const std::span<const double> p(row.point.data(), static_cast<std::size_t>(spec.d_in));
  double v = row.coef * forward_jet(params, p, m).first[row.component];
  if (row.paired) {
    const std::span<const double> q(row.pair_point.data(), static_cast<std::size_t>(spec.d_in));
    v += row.pair_coef * forward_jet(params, q, m).first[row.component];
  }
  return v - row.target;
}

/// Stacked scaled residuals: boundary rows over sqrt(N_b), then residual rows
/// over sqrt(N_r), so that 1/2 |rho|^2 is the loss.
inline Eigen::VectorXd residual_vector(const MlpParams& params, const ResidualSpec& spec, const CollocationSet& data) {
  if (params.d_in() != spec.d_in || data.residual.cols() != spec.d_in) {
    throw std::invalid_argument("residual_vector: dimension mismatch between network, spec and data");
  }
  Eigen::VectorXd rho(data.rows());
  const double sb = 1.0 / std::sqrt(static_cast<double>(data.n_b()));
  const double sr = 1.0 / std::sqrt(static_cast<double>(data.n_r()));
  for (int i = 0; i < data.n_b_rows(); ++i) rho[i] = sb * boundary_value(params, spec, data.boundary[static_cast<std::size_t>(i)]);
  const DerivativeMask m = spec.mask.closure();
  for (int i = 0; i < data.n_r(); ++i) {
    const auto p = row_span(data.residual, i);
    rho[data.n_b_rows() + i] = sr * residual(spec, forward_jet(params, p, m).first, p);
  }
  return rho;
}

inline LossTerms loss(const MlpParams& params, const ResidualSpec& spec, const CollocationSet& data) {
  const Eigen::VectorXd rho = residual_vector(params, spec, data);
  LossTerms out;
  out.boundary = 0.5 * rho.head(data.n_b_rows()).squaredNorm();
  out.residual = 0.5 * rho.tail(data.n_r()).squaredNorm();
  out.total = out.boundary + out.residual;
  return out;
}

struct EvalGrid {
  PointSet points;
  Eigen::VectorXd exact;
};

/// Tensor grid including the domain corners; for burgers the time axis stops
/// at 0.99.
inline EvalGrid make_eval_grid(const ResidualSpec& spec, int nx = 0, int nt = 0) {
  if (!spec.has_exact()) throw std::invalid_argument("spec '" + spec.name + "' has no exact solution");
  EvalGrid g;
  auto linspace = [](double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
  };
  if (spec.d_in == 1) {
    if (nx <= 0) nx = spec.name == "poisson_highfreq" ? 2001 : 201;
    auto xs = linspace(spec.domain.lo[0], spec.domain.hi[0], nx);
    g.points.resize(nx, 1);
    for (int i = 0; i < nx; ++i) g.points(i, 0) = xs[static_cast<std::size_t>(i)];
  } else {
    if (nx <= 0) nx = spec.name == "wave" ? 101 : 256;
    if (nt <= 0) nt = spec.name == "wave" ? 101 : 100;
    const double t_hi = spec.name == "burgers" ? 0.99 : spec.domain.hi[1];
    auto xs = linspace(spec.domain.lo[0], spec.domain.hi[0], nx);
    auto ts = linspace(spec.domain.lo[1], t_hi, nt);
    g.points.resize(static_cast<Eigen::Index>(nx) * nt, 2);
    for (int j = 0; j < nt; ++j) {
      for (int i = 0; i < nx; ++i) {
        g.points(j * nx + i, 0) = xs[static_cast<std::size_t>(i)];
        g.points(j * nx + i, 1) = ts[static_cast<std::size_t>(j)];
      }
    }
  }
  g.exact.resize(g.points.rows());
  for (Eigen::Index i = 0; i < g.points.rows(); ++i) g.exact[i] = spec.exact_value(row_span(g.points, i));
  return g;
}

/// Relative error of predictions against the grid's exact values. The default
/// is the norm ratio; `literal` sums pointwise |u - u_hat| / |u| over points
/// with |u| >= 1e-8.
inline double relative_l2(const Eigen::VectorXd& predicted, const Eigen::VectorXd& exact, bool literal = false) {
  if (predicted.size() != exact.size()) throw std::invalid_argument("relative_l2: size mismatch");
  if (!literal) return (predicted - exact).norm() / exact.norm();
  double s = 0.0;
  for (Eigen::Index i = 0; i < exact.size(); ++i) {
    if (std::abs(exact[i]) < 1e-8) continue;
    s += std::abs(exact[i] - predicted[i]) / std::abs(exact[i]);
  }
  return s;
}

inline double relative_l2(const MlpParams& params, const ResidualSpec& spec, const EvalGrid& grid, bool literal = false) {
  if (!spec.has_exact()) throw std::invalid_argument("relative_l2: spec '" + spec.name + "' has no exact solution");
  Eigen::VectorXd pred(grid.points.rows());
  for (Eigen::Index i = 0; i < grid.points.rows(); ++i) pred[i] = evaluate(params, row_span(grid.points, i));
  return relative_l2(pred, grid.exact, literal);
}

}  // namespace tangent_kit
