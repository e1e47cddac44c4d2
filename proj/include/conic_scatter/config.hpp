#pragma once

// Experiment configuration: a JSON document whose every key is optional.
// Unknown keys and wrongly typed values are usage errors naming the field
// path; defaults depend on the experiment and are written back in full.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "conic_scatter/errors.hpp"
#include "conic_scatter/perturbed_dynamics.hpp"
#include "conic_scatter/phase_geometry.hpp"
#include "conic_scatter/radial_smatrix.hpp"
#include "conic_scatter/wavefront_lab.hpp"

namespace conic_scatter {

using Json = nlohmann::ordered_json;

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"flow",       "wave-ops",  "scatter-map", "rates",
                                              "components", "transport", "smatrix",     "wavefront"};
  return names;
}

inline constexpr std::uint64_t default_seed = 20240611;

struct ManifoldConfig {
  std::string kind = "circle";  // circle | cosine | tabulated
  double a = 1.0;
  double epsilon = 0.0;
  std::vector<double> samples;  // h(theta_j) on an equispaced grid, tabulated only

  BoundaryMetric build() const {
    if (kind == "circle") return BoundaryMetric::constant(a);
    if (kind == "cosine") return BoundaryMetric::cosine(a, epsilon);
    if (kind == "tabulated") return BoundaryMetric::tabulated(samples);
    fail(ErrorKind::usage, "manifold.kind: expected circle, cosine or tabulated, got '" + kind + "'");
  }
};

struct ProfileConfig {
  std::string family = "regularized";  // trivial | regularized | power
  double mu = 0.5;
  double c1 = 0.05;
  double c2 = 0.1;
  double c3 = 0.3;
  double cV = 0.05;

  PerturbationProfile build() const {
    if (family == "trivial") return PerturbationProfile::trivial();
    if (family == "regularized") return PerturbationProfile::regularized(mu, c1, c2, c3, cV);
    if (family == "power") return PerturbationProfile::power(mu, c1, c2, c3, cV);
    fail(ErrorKind::usage, "profile.family: expected trivial, regularized or power, got '" + family + "'");
  }
};

struct PotentialConfig {
  // from-profile | zero | lorentzian | regularized-power | gaussian
  std::string kind = "from-profile";
  double strength = 0.0;
  double mu = 1.0;

  /// from-profile reads W off a separable profile: the regularized V is the
  /// regularized-power potential with the same mu.
  RadialPotential build(const PerturbationProfile& p) const {
    if (kind == "zero") return RadialPotential::zero();
    if (kind == "lorentzian") return RadialPotential::lorentzian(strength);
    if (kind == "gaussian") return RadialPotential::gaussian(strength);
    if (kind == "regularized-power") return RadialPotential::regularized_power(strength, mu);
    if (kind != "from-profile")
      fail(ErrorKind::usage, "potential.kind: expected from-profile, zero, lorentzian, regularized-power or gaussian");
    if (p.is_trivial()) return RadialPotential::zero();
    require(p.is_separable(), ErrorKind::usage,
            "profile: only V may be nonzero for the separable model (set c1 = c2 = c3 = 0 or give potential.kind)");
    require(p.family == ProfileFamily::regularized, ErrorKind::usage,
            "profile.family: the power family is singular at r = 0; use regularized or give potential.kind");
    return RadialPotential::regularized_power(p.cV, p.mu);
  }
};

struct NumericConfig {
  double tol = 1e-10;
  double T = 1e4;                  // extraction horizon
  double h = 0.125;                // semiclassical scale for flow / scatter-map
  std::vector<double> h_grid = default_h_grid();
  long m_max = 201;
  std::size_t grid_size = 1024;
  std::size_t points = 8;          // seeded test points
  double lambda = 0.5;
  double horizon = 50.0;           // trajectories run over [-horizon, horizon]
  std::size_t samples = 101;       // trajectory samples
  int steps = 8;                   // transport grid refinement
  double transport_time = 1.0;
};

struct WavefrontConfig {
  std::string test_function = "cusp";  // cusp | hardy-plus | hardy-minus | smooth
  double theta0 = 0.0;
  double alpha = 0.3;
  double tol_cells = 2.0;

  TestFunction build(long m_max) const {
    TestFunctionKind k;
    if (test_function == "cusp") k = TestFunctionKind::cusp;
    else if (test_function == "hardy-plus") k = TestFunctionKind::hardy_plus;
    else if (test_function == "hardy-minus") k = TestFunctionKind::hardy_minus;
    else if (test_function == "smooth") k = TestFunctionKind::smooth;
    else fail(ErrorKind::usage, "wavefront.test_function: expected cusp, hardy-plus, hardy-minus or smooth");
    return {k, theta0, alpha, m_max};
  }
};

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = default_seed;
  std::string output = "out";
  ManifoldConfig manifold;
  ProfileConfig profile;
  PotentialConfig potential;
  NumericConfig numeric;
  WavefrontConfig wavefront;
};

/// Defaults for one experiment, before any user value is applied.
inline ExperimentConfig default_config(const std::string& experiment) {
  const auto& names = experiment_names();
  require(std::find(names.begin(), names.end(), experiment) != names.end(), ErrorKind::usage,
          "experiment: unknown experiment '" + experiment + "'");
  ExperimentConfig c;
  c.experiment = experiment;
  auto& n = c.numeric;
  if (experiment == "flow") {
    n.points = 20;
    n.h = 1.0;
  } else if (experiment == "wave-ops") {
    n.tol = 1e-12;
    n.points = 50;
    c.manifold.kind = "cosine";
    c.manifold.epsilon = 0.3;
  } else if (experiment == "scatter-map") {
    n.tol = 1e-11;
    n.points = 8;
  } else if (experiment == "rates") {
    n.points = 3;
    c.manifold.kind = "cosine";
    c.manifold.epsilon = 0.3;
  } else if (experiment == "components") {
    c.manifold.kind = "cosine";
    c.manifold.epsilon = 0.3;
  } else if (experiment == "smatrix" || experiment == "wavefront") {
    c.profile = {"trivial", 1.0, 0.0, 0.0, 0.0, 0.0};
    n.tol = 1e-6;
    if (experiment == "wavefront") {
      n.m_max = 1024;
      n.grid_size = 4096;
    }
  }
  return c;
}

namespace detail {

/// Walks one JSON object, tracking which keys were consumed.
class ConfigReader {
 public:
  ConfigReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), ErrorKind::usage, where("") + ": expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const Json& v = j_.at(key);
    if constexpr (std::is_same_v<T, std::string>) {
      require(v.is_string(), ErrorKind::usage, where(key) + ": expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      require(v.is_number(), ErrorKind::usage, where(key) + ": expected a number");
      out = v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
      require(v.is_number_integer(), ErrorKind::usage, where(key) + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        require(v.is_number_unsigned() || v.get<long long>() >= 0, ErrorKind::usage, where(key) + ": must be nonnegative");
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      require(v.is_array(), ErrorKind::usage, where(key) + ": expected an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        require(v[i].is_number(), ErrorKind::usage, where(key) + "[" + std::to_string(i) + "]: expected a number");
        out.push_back(v[i].get<double>());
      }
    }
  }

  ConfigReader child(const std::string& key) {
    seen_.insert(key);
    return ConfigReader(j_.at(key), where(key));
  }
  bool has(const std::string& key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& item : j_.items()) {
      require(seen_.count(item.key()) > 0, ErrorKind::usage, where(item.key()) + ": unknown key");
    }
  }

 private:
  std::string where(const std::string& key) const {
    if (path_.empty()) return key.empty() ? "config" : key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Applies a JSON document on top of the experiment defaults and validates ranges.
inline ExperimentConfig parse_config(const Json& j, const std::string& experiment) {
  ExperimentConfig c = default_config(experiment);
  detail::ConfigReader root(j, "");
  std::string declared = experiment;
  root.get("experiment", declared);
  require(declared == experiment, ErrorKind::usage,
          "experiment: config declares '" + declared + "' but '" + experiment + "' was requested");
  root.get("seed", c.seed);
  root.get("output", c.output);
  if (root.has("manifold")) {
    auto r = root.child("manifold");
    r.get("kind", c.manifold.kind);
    r.get("a", c.manifold.a);
    r.get("epsilon", c.manifold.epsilon);
    r.get("samples", c.manifold.samples);
    r.finish();
  }
  if (root.has("profile")) {
    auto r = root.child("profile");
    r.get("family", c.profile.family);
    r.get("mu", c.profile.mu);
    r.get("c1", c.profile.c1);
    r.get("c2", c.profile.c2);
    r.get("c3", c.profile.c3);
    r.get("cV", c.profile.cV);
    r.finish();
  }
  if (root.has("potential")) {
    auto r = root.child("potential");
    r.get("kind", c.potential.kind);
    r.get("strength", c.potential.strength);
    r.get("mu", c.potential.mu);
    r.finish();
  }
  if (root.has("numeric")) {
    auto r = root.child("numeric");
    auto& n = c.numeric;
    r.get("tol", n.tol);
    r.get("T", n.T);
    r.get("h", n.h);
    r.get("h_grid", n.h_grid);
    r.get("m_max", n.m_max);
    r.get("grid_size", n.grid_size);
    r.get("points", n.points);
    r.get("lambda", n.lambda);
    r.get("horizon", n.horizon);
    r.get("samples", n.samples);
    r.get("steps", n.steps);
    r.get("transport_time", n.transport_time);
    r.finish();
  }
  if (root.has("wavefront")) {
    auto r = root.child("wavefront");
    r.get("test_function", c.wavefront.test_function);
    r.get("theta0", c.wavefront.theta0);
    r.get("alpha", c.wavefront.alpha);
    r.get("tol_cells", c.wavefront.tol_cells);
    r.finish();
  }
  root.finish();

  const auto& n = c.numeric;
  require(n.tol > 0.0 && n.tol < 1e-2, ErrorKind::usage, "numeric.tol: must lie in (0, 1e-2)");
  require(n.T >= 1e3, ErrorKind::usage, "numeric.T: must be at least 1e3");
  require(n.h > 0.0 && n.h <= 1.0, ErrorKind::usage, "numeric.h: must lie in (0, 1]");
  require(n.h_grid.size() >= 2, ErrorKind::usage, "numeric.h_grid: needs at least two values");
  for (double h : n.h_grid) require(h > 0.0 && h <= 1.0, ErrorKind::usage, "numeric.h_grid: values must lie in (0, 1]");
  require(n.m_max >= 10, ErrorKind::usage, "numeric.m_max: must be at least 10");
  require(n.grid_size >= 16, ErrorKind::usage, "numeric.grid_size: must be at least 16");
  require(n.points >= 1, ErrorKind::usage, "numeric.points: must be positive");
  require(n.lambda > 0.0, ErrorKind::usage, "numeric.lambda: must be positive");
  require(n.horizon > 0.0, ErrorKind::usage, "numeric.horizon: must be positive");
  require(n.samples >= 2, ErrorKind::usage, "numeric.samples: must be at least 2");
  require(n.steps >= 1, ErrorKind::usage, "numeric.steps: must be positive");
  require(c.wavefront.tol_cells >= 0.0, ErrorKind::usage, "wavefront.tol_cells: must be nonnegative");
  return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::string& experiment) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open config file '" + path + "'");
  std::stringstream text;
  text << in.rdbuf();
  Json j;
  try {
    j = Json::parse(text.str());
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::usage, "config: not valid JSON (" + std::string(e.what()) + ")");
  }
  return parse_config(j, experiment);
}

/// The fully materialized configuration.
inline Json to_json(const ExperimentConfig& c) {
  const auto& n = c.numeric;
  return Json{
      {"experiment", c.experiment},
      {"seed", c.seed},
      {"output", c.output},
      {"manifold", {{"kind", c.manifold.kind}, {"a", c.manifold.a}, {"epsilon", c.manifold.epsilon},
                    {"samples", c.manifold.samples}}},
      {"profile", {{"family", c.profile.family}, {"mu", c.profile.mu}, {"c1", c.profile.c1}, {"c2", c.profile.c2},
                   {"c3", c.profile.c3}, {"cV", c.profile.cV}}},
      {"potential", {{"kind", c.potential.kind}, {"strength", c.potential.strength}, {"mu", c.potential.mu}}},
      {"numeric", {{"tol", n.tol}, {"T", n.T}, {"h", n.h}, {"h_grid", n.h_grid}, {"m_max", n.m_max},
                   {"grid_size", n.grid_size}, {"points", n.points}, {"lambda", n.lambda}, {"horizon", n.horizon},
                   {"samples", n.samples}, {"steps", n.steps}, {"transport_time", n.transport_time}}},
      {"wavefront", {{"test_function", c.wavefront.test_function}, {"theta0", c.wavefront.theta0},
                     {"alpha", c.wavefront.alpha}, {"tol_cells", c.wavefront.tol_cells}}},
  };
}

}  // namespace conic_scatter
