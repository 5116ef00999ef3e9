#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hjlayer/errors.hpp"
#include "hjlayer/grid.hpp"
#include "hjlayer/hamiltonian.hpp"
#include "hjlayer/initial_data.hpp"

namespace hjlayer {

inline constexpr const char* kSchemaVersion = "hjlayer.problem/1";

struct GridSpec {
  std::vector<Interval> box;
  std::vector<std::size_t> counts;
  Grid grid() const { return Grid(box, counts); }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct SigmaSpec {
  std::string kind = "pwl";  // pwl | polynomial | samples
  PiecewiseLinear pwl;
  std::vector<double> coefficients;
  GridSpec samples_grid;
  std::vector<double> samples;
  double smoothing_radius = 0.0;
  friend bool operator==(const SigmaSpec&, const SigmaSpec&) = default;
};

struct TermSpec {
  std::vector<double> g;
  std::vector<std::vector<double>> h;  // one shared list, or one per coordinate
  std::optional<SampledProfile> h_samples;
  friend bool operator==(const TermSpec&, const TermSpec&) = default;
};

struct LayerSpec {
  std::string kind = "separable";  // convex | concave | separable
  std::vector<TermSpec> terms;
  std::vector<double> k;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct HamiltonianSpec {
  std::vector<double> breakpoints;
  std::vector<LayerSpec> layers;
  friend bool operator==(const HamiltonianSpec&, const HamiltonianSpec&) = default;
};

struct Tolerances {
  double tie_rel = 1e-9;
  double diam_threshold = 0.0;   // default: 3 dual spacings
  double fd_step = 1e-3;
  double residual_tol = 1e-2;
  double exclusion_spacings = 3.0;
  double momentum_tol = 0.0;     // default: 1 dual spacing
  double semiconvexity_rel_tol = 1e-7;
  double hopf_tol = 1e-9;
  double gluing_tol = 1e-8;
  friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

struct VerifySpec {
  std::size_t semiconvexity_samples = 100000;
  double semiconvexity_C = -1.0;  // default: 4 sup|H_t| over the dual box
  friend bool operator==(const VerifySpec&, const VerifySpec&) = default;
};

struct CharacteristicsSpec {
  std::vector<double> y;
  std::vector<std::array<double, 2>> targets;  // (t, x)
  Interval scan_box{0.0, 0.0};                  // default: x box
  std::size_t scan_count = 20001;
  double tol = 1e-10;
  friend bool operator==(const CharacteristicsSpec&, const CharacteristicsSpec&) = default;
};

struct SingularSpec {
  bool auto_anchor = true;
  std::vector<std::array<double, 2>> anchors;
  double dt = 0.05;
  std::size_t max_steps = 1000;
  double dx = 0.0;  // default: x spacing
  std::size_t window_steps = 50;
  friend bool operator==(const SingularSpec&, const SingularSpec&) = default;
};

/// Validated, default-filled problem description.
struct ProblemSpec {
  std::size_t dimension = 1;
  double horizon = 1.0;
  SigmaSpec sigma;
  HamiltonianSpec hamiltonian;
  GridSpec dual;
  GridSpec x;
  GridSpec sigma_grid;
  std::size_t t_count = 101;
  Tolerances tolerances;
  VerifySpec verify;
  CharacteristicsSpec characteristics;
  SingularSpec singular;
  std::uint64_t seed = 0;
  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;

  std::vector<double> times() const {
    std::vector<double> t(t_count);
    for (std::size_t i = 0; i < t_count; ++i)
      t[i] = i + 1 == t_count ? horizon : horizon * static_cast<double>(i) / static_cast<double>(t_count - 1);
    return t;
  }
};

/// Configuration problems: malformed JSON, unknown or missing fields, failed invariants.
class ValidationError : public InputError {
public:
  using InputError::InputError;
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(path + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ValidationError(path + ": unknown field '" + it.key() + "'");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ValidationError(path + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(path + "." + key + ": " + e.what());
  }
}

inline const json& child(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ValidationError(path + ": missing field '" + key + "'");
  return j.at(key);
}

template <class T>
T get_or(const json& j, const std::string& key, const std::string& path, T fallback) {
  return j.contains(key) ? get<T>(j, key, path) : fallback;
}

inline GridSpec parse_grid(const json& j, const std::string& path) {
  check_keys(j, path, {"box", "counts"});
  GridSpec g;
  const auto box = get<std::vector<std::array<double, 2>>>(j, "box", path);
  for (const auto& b : box) g.box.push_back({b[0], b[1]});
  g.counts = get<std::vector<std::size_t>>(j, "counts", path);
  try {
    (void)g.grid();
  } catch (const InputError& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return g;
}

inline json grid_json(const GridSpec& g) {
  json box = json::array();
  for (const auto& b : g.box) box.push_back({b.lo, b.hi});
  return {{"box", box}, {"counts", g.counts}};
}

inline TermSpec parse_term(const json& j, const std::string& path) {
  check_keys(j, path, {"g", "h", "h_samples"});
  TermSpec t;
  t.g = get<std::vector<double>>(j, "g", path);
  if (j.contains("h") == j.contains("h_samples"))
    throw ValidationError(path + ": exactly one of 'h' and 'h_samples' is required");
  if (j.contains("h")) {
    const json& h = j.at("h");
    if (h.is_array() && !h.empty() && h.front().is_array()) {
      t.h = get<std::vector<std::vector<double>>>(j, "h", path);
    } else {
      t.h = {get<std::vector<double>>(j, "h", path)};
    }
  } else {
    const json& s = j.at("h_samples");
    check_keys(s, path + ".h_samples", {"lo", "hi", "values"});
    SampledProfile p;
    p.lo = get<double>(s, "lo", path + ".h_samples");
    p.hi = get<double>(s, "hi", path + ".h_samples");
    p.values = get<std::vector<double>>(s, "values", path + ".h_samples");
    if (!(p.lo < p.hi) || p.values.size() < 3)
      throw ValidationError(path + ".h_samples: need lo < hi and at least 3 values");
    t.h_samples = p;
  }
  return t;
}

inline json term_json(const TermSpec& t) {
  json j{{"g", t.g}};
  if (t.h_samples) {
    j["h_samples"] = {{"lo", t.h_samples->lo}, {"hi", t.h_samples->hi}, {"values", t.h_samples->values}};
  } else if (t.h.size() == 1) {
    j["h"] = t.h[0];
  } else {
    j["h"] = t.h;
  }
  return j;
}

inline LayerSpec parse_layer(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "terms", "k"});
  LayerSpec l;
  l.kind = get<std::string>(j, "kind", path);
  if (l.kind != "convex" && l.kind != "concave" && l.kind != "separable")
    throw ValidationError(path + ".kind: expected convex, concave or separable");
  const json& terms = j.contains("terms") ? j.at("terms") : json::array();
  if (!terms.is_array()) throw ValidationError(path + ".terms: expected an array");
  for (std::size_t i = 0; i < terms.size(); ++i)
    l.terms.push_back(parse_term(terms[i], path + ".terms[" + std::to_string(i) + "]"));
  l.k = get_or<std::vector<double>>(j, "k", path, {});
  return l;
}

inline json layer_json(const LayerSpec& l) {
  json terms = json::array();
  for (const auto& t : l.terms) terms.push_back(term_json(t));
  return {{"kind", l.kind}, {"terms", terms}, {"k", l.k}};
}

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace detail

/// Builds the library objects described by a spec.
inline InitialData make_sigma(const ProblemSpec& s) {
  const auto& sg = s.sigma;
  if (sg.kind == "pwl") return InitialData(s.dimension, sg.pwl, sg.smoothing_radius);
  if (sg.kind == "polynomial") return InitialData(s.dimension, Polynomial(sg.coefficients), sg.smoothing_radius);
  return InitialData(s.dimension, SampledFunction(sg.samples_grid.grid(), sg.samples), sg.smoothing_radius);
}

inline SeparableTerm make_term(const TermSpec& t) {
  if (t.h_samples) return {Polynomial(t.g), Profile(*t.h_samples)};
  std::vector<Polynomial> h;
  for (const auto& c : t.h) h.emplace_back(c);
  return {Polynomial(t.g), Profile(std::move(h))};
}

inline HamiltonianPtr make_hamiltonian(const ProblemSpec& s) {
  std::vector<LayerForm> layers;
  for (const auto& l : s.hamiltonian.layers) {
    PolynomialForm f;
    for (const auto& t : l.terms) f.terms.push_back(make_term(t));
    f.k = Polynomial(l.k);
    const LayerKind kind = l.kind == "convex"    ? LayerKind::ConvexInP
                           : l.kind == "concave" ? LayerKind::ConcaveInP
                                                 : LayerKind::Separable;
    layers.push_back({kind, std::move(f)});
  }
  return std::make_shared<const LayeredHamiltonian>(s.dimension, s.hamiltonian.breakpoints, std::move(layers));
}

/// Parses and validates a problem spec, filling every default.
inline ProblemSpec parse_spec(const std::string& text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("parse error at line " + std::to_string(detail::line_of_offset(text, e.byte)) + ": " +
                          e.what());
  }
  detail::check_keys(j, "spec", {"schema", "dimension", "horizon", "sigma", "hamiltonian", "grids", "tolerances",
                                 "verify", "characteristics", "singular", "seed"});
  const auto schema = detail::get<std::string>(j, "schema", "spec");
  if (schema != kSchemaVersion) throw ValidationError("spec.schema: unsupported schema '" + schema + "'");

  ProblemSpec s;
  s.dimension = detail::get<std::size_t>(j, "dimension", "spec");
  if (s.dimension != 1 && s.dimension != 2) throw ValidationError("spec.dimension: must be 1 or 2");
  s.horizon = detail::get<double>(j, "horizon", "spec");
  if (!(s.horizon > 0.0) || !std::isfinite(s.horizon)) throw ValidationError("spec.horizon: T must be positive");
  s.seed = detail::get_or<std::uint64_t>(j, "seed", "spec", 0);

  // sigma
  {
    const json& sj = detail::child(j, "sigma", "spec");
    const std::string p = "spec.sigma";
    detail::check_keys(sj, p, {"kind", "breakpoints", "slopes", "offset", "coefficients", "grid", "values",
                               "smoothing_radius"});
    auto& sg = s.sigma;
    sg.kind = detail::get<std::string>(sj, "kind", p);
    sg.smoothing_radius = detail::get_or<double>(sj, "smoothing_radius", p, 0.0);
    if (sg.kind == "pwl") {
      sg.pwl.breakpoints = detail::get<std::vector<double>>(sj, "breakpoints", p);
      sg.pwl.slopes = detail::get<std::vector<double>>(sj, "slopes", p);
      sg.pwl.offset = detail::get_or<double>(sj, "offset", p, 0.0);
    } else if (sg.kind == "polynomial") {
      sg.coefficients = detail::get<std::vector<double>>(sj, "coefficients", p);
    } else if (sg.kind == "samples") {
      sg.samples_grid = detail::parse_grid(detail::child(sj, "grid", p), p + ".grid");
      sg.samples = detail::get<std::vector<double>>(sj, "values", p);
    } else {
      throw ValidationError(p + ".kind: expected pwl, polynomial or samples");
    }
  }

  // hamiltonian: explicit layers, or a single separable term split automatically
  {
    const json& hj = detail::child(j, "hamiltonian", "spec");
    const std::string p = "spec.hamiltonian";
    detail::check_keys(hj, p, {"breakpoints", "layers", "auto_split"});
    if (hj.contains("auto_split")) {
      if (hj.contains("layers") || hj.contains("breakpoints"))
        throw ValidationError(p + ": auto_split excludes explicit layers and breakpoints");
      const json& a = hj.at("auto_split");
      detail::check_keys(a, p + ".auto_split", {"g", "h", "h_samples", "k"});
      json term = a;
      term.erase("k");
      const TermSpec t = detail::parse_term(term, p + ".auto_split");
      const auto k = detail::get_or<std::vector<double>>(a, "k", p + ".auto_split", {});
      s.hamiltonian.breakpoints = {0.0};
      for (double r : detect_breakpoints(Polynomial(t.g), s.horizon)) s.hamiltonian.breakpoints.push_back(r);
      s.hamiltonian.breakpoints.push_back(s.horizon);
      for (std::size_t i = 0; i + 1 < s.hamiltonian.breakpoints.size(); ++i)
        s.hamiltonian.layers.push_back({"separable", {t}, k});
    } else {
      s.hamiltonian.breakpoints = detail::get<std::vector<double>>(hj, "breakpoints", p);
      const json& layers = detail::child(hj, "layers", p);
      if (!layers.is_array()) throw ValidationError(p + ".layers: expected an array");
      for (std::size_t i = 0; i < layers.size(); ++i)
        s.hamiltonian.layers.push_back(detail::parse_layer(layers[i], p + ".layers[" + std::to_string(i) + "]"));
      if (s.hamiltonian.breakpoints.empty() || s.hamiltonian.breakpoints.back() != s.horizon)
        throw ValidationError(p + ".breakpoints: last breakpoint must equal the horizon");
    }
  }

  // grids
  {
    const json& gj = detail::child(j, "grids", "spec");
    const std::string p = "spec.grids";
    detail::check_keys(gj, p, {"dual", "x", "sigma", "t_count"});
    s.x = detail::parse_grid(detail::child(gj, "x", p), p + ".x");
    if (s.x.box.size() != s.dimension) throw ValidationError(p + ".x: dimension mismatch");
    s.sigma_grid = gj.contains("sigma") ? detail::parse_grid(gj.at("sigma"), p + ".sigma") : s.x;
    if (s.sigma_grid.box.size() != s.dimension) throw ValidationError(p + ".sigma: dimension mismatch");
    s.t_count = detail::get_or<std::size_t>(gj, "t_count", p, 101);
    if (s.t_count < 2) throw ValidationError(p + ".t_count: must be at least 2");
  }

  std::optional<InitialData> sigma;
  try {
    sigma.emplace(make_sigma(s));
    sigma->validate_convex(s.sigma_grid.grid());
  } catch (const ValidationError&) {
    throw;
  } catch (const InputError& e) {
    throw ValidationError(std::string("spec.sigma: ") + e.what());
  }
  try {
    (void)make_hamiltonian(s);
  } catch (const StructuralError& e) {
    throw ValidationError(std::string("spec.hamiltonian: ") + e.what());
  } catch (const InputError& e) {
    throw ValidationError(std::string("spec.hamiltonian: ") + e.what());
  }

  {
    const json& gj = j.at("grids");
    if (gj.contains("dual")) {
      s.dual = detail::parse_grid(gj.at("dual"), "spec.grids.dual");
      if (s.dual.box.size() != s.dimension) throw ValidationError("spec.grids.dual: dimension mismatch");
    } else {
      const double L = sigma->lipschitz_estimate(s.sigma_grid.grid());
      if (!(L > 0.0)) throw ValidationError("spec.grids.dual: sigma has zero slope; give the dual box explicitly");
      for (std::size_t d = 0; d < s.dimension; ++d) {
        s.dual.box.push_back({-L, L});
        s.dual.counts.push_back(s.dimension == 1 ? 2001 : 201);
      }
    }
  }
  const Grid dual = s.dual.grid();
  const Grid xg = s.x.grid();
  try {
    make_hamiltonian(s)->validate(StructureCheck{dual});
  } catch (const StructuralError& e) {
    throw ValidationError(std::string("spec.hamiltonian: ") + e.what());
  }

  if (j.contains("tolerances")) {
    const json& tj = j.at("tolerances");
    const std::string p = "spec.tolerances";
    detail::check_keys(tj, p, {"tie_rel", "diam_threshold", "fd_step", "residual_tol", "exclusion_spacings",
                               "momentum_tol", "semiconvexity_rel_tol", "hopf_tol", "gluing_tol"});
    auto& t = s.tolerances;
    t.tie_rel = detail::get_or(tj, "tie_rel", p, t.tie_rel);
    t.diam_threshold = detail::get_or(tj, "diam_threshold", p, t.diam_threshold);
    t.fd_step = detail::get_or(tj, "fd_step", p, t.fd_step);
    t.residual_tol = detail::get_or(tj, "residual_tol", p, t.residual_tol);
    t.exclusion_spacings = detail::get_or(tj, "exclusion_spacings", p, t.exclusion_spacings);
    t.momentum_tol = detail::get_or(tj, "momentum_tol", p, t.momentum_tol);
    t.semiconvexity_rel_tol = detail::get_or(tj, "semiconvexity_rel_tol", p, t.semiconvexity_rel_tol);
    t.hopf_tol = detail::get_or(tj, "hopf_tol", p, t.hopf_tol);
    t.gluing_tol = detail::get_or(tj, "gluing_tol", p, t.gluing_tol);
  }
  if (s.tolerances.diam_threshold == 0.0) s.tolerances.diam_threshold = 3.0 * dual.max_spacing();
  if (s.tolerances.momentum_tol == 0.0) s.tolerances.momentum_tol = dual.max_spacing();
  if (!(s.tolerances.diam_threshold > dual.max_spacing()))
    throw ValidationError("spec.tolerances.diam_threshold: must exceed the dual-grid spacing");
  if (!(s.tolerances.fd_step > 0.0) || !(s.tolerances.fd_step < xg.max_spacing()))
    throw ValidationError("spec.tolerances.fd_step: must be positive and smaller than the x spacing");

  if (j.contains("verify")) {
    const json& vj = j.at("verify");
    detail::check_keys(vj, "spec.verify", {"semiconvexity_samples", "semiconvexity_C"});
    s.verify.semiconvexity_samples =
        detail::get_or(vj, "semiconvexity_samples", "spec.verify", s.verify.semiconvexity_samples);
    s.verify.semiconvexity_C = detail::get_or(vj, "semiconvexity_C", "spec.verify", s.verify.semiconvexity_C);
  }
  if (s.verify.semiconvexity_C < 0.0) {
    const LayeredHamiltonian H = *make_hamiltonian(s);
    s.verify.semiconvexity_C = 4.0 * H.sup_abs_Ht(s.dual.box).value;
  }

  if (j.contains("characteristics")) {
    const json& cj = j.at("characteristics");
    const std::string p = "spec.characteristics";
    detail::check_keys(cj, p, {"y", "targets", "scan_box", "scan_count", "tol"});
    auto& c = s.characteristics;
    c.y = detail::get_or(cj, "y", p, c.y);
    c.targets = detail::get_or(cj, "targets", p, c.targets);
    if (cj.contains("scan_box")) {
      const auto b = detail::get<std::array<double, 2>>(cj, "scan_box", p);
      c.scan_box = {b[0], b[1]};
    }
    c.scan_count = detail::get_or(cj, "scan_count", p, c.scan_count);
    c.tol = detail::get_or(cj, "tol", p, c.tol);
  }
  if (s.characteristics.scan_box.lo == 0.0 && s.characteristics.scan_box.hi == 0.0)
    s.characteristics.scan_box = s.x.box[0];

  if (j.contains("singular")) {
    const json& aj = j.at("singular");
    const std::string p = "spec.singular";
    detail::check_keys(aj, p, {"anchors", "dt", "max_steps", "dx", "window_steps"});
    auto& a = s.singular;
    if (aj.contains("anchors")) {
      const json& an = aj.at("anchors");
      if (an.is_string()) {
        if (an.get<std::string>() != "auto") throw ValidationError(p + ".anchors: expected \"auto\" or a list");
        a.auto_anchor = true;
      } else {
        a.auto_anchor = false;
        a.anchors = detail::get<std::vector<std::array<double, 2>>>(aj, "anchors", p);
      }
    }
    a.dt = detail::get_or(aj, "dt", p, a.dt);
    a.max_steps = detail::get_or(aj, "max_steps", p, a.max_steps);
    a.dx = detail::get_or(aj, "dx", p, a.dx);
    a.window_steps = detail::get_or(aj, "window_steps", p, a.window_steps);
  }
  if (s.singular.dx == 0.0) s.singular.dx = xg.spacing(0);
  return s;
}

inline ProblemSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open spec file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

/// The default-filled spec in the input schema; reloading it yields an equal ProblemSpec.
inline nlohmann::json to_json(const ProblemSpec& s) {
  using detail::json;
  json sigma{{"kind", s.sigma.kind}};
  if (s.sigma.kind == "pwl") {
    sigma["breakpoints"] = s.sigma.pwl.breakpoints;
    sigma["slopes"] = s.sigma.pwl.slopes;
    sigma["offset"] = s.sigma.pwl.offset;
  } else if (s.sigma.kind == "polynomial") {
    sigma["coefficients"] = s.sigma.coefficients;
  } else {
    sigma["grid"] = detail::grid_json(s.sigma.samples_grid);
    sigma["values"] = s.sigma.samples;
  }
  sigma["smoothing_radius"] = s.sigma.smoothing_radius;

  json layers = json::array();
  for (const auto& l : s.hamiltonian.layers) layers.push_back(detail::layer_json(l));

  const auto& t = s.tolerances;
  json targets = json::array();
  for (const auto& tg : s.characteristics.targets) targets.push_back({tg[0], tg[1]});
  json anchors = "auto";
  if (!s.singular.auto_anchor) {
    anchors = json::array();
    for (const auto& a : s.singular.anchors) anchors.push_back({a[0], a[1]});
  }
  return {
      {"schema", kSchemaVersion},
      {"dimension", s.dimension},
      {"horizon", s.horizon},
      {"sigma", sigma},
      {"hamiltonian", {{"breakpoints", s.hamiltonian.breakpoints}, {"layers", layers}}},
      {"grids",
       {{"dual", detail::grid_json(s.dual)},
        {"x", detail::grid_json(s.x)},
        {"sigma", detail::grid_json(s.sigma_grid)},
        {"t_count", s.t_count}}},
      {"tolerances",
       {{"tie_rel", t.tie_rel},
        {"diam_threshold", t.diam_threshold},
        {"fd_step", t.fd_step},
        {"residual_tol", t.residual_tol},
        {"exclusion_spacings", t.exclusion_spacings},
        {"momentum_tol", t.momentum_tol},
        {"semiconvexity_rel_tol", t.semiconvexity_rel_tol},
        {"hopf_tol", t.hopf_tol},
        {"gluing_tol", t.gluing_tol}}},
      {"verify",
       {{"semiconvexity_samples", s.verify.semiconvexity_samples}, {"semiconvexity_C", s.verify.semiconvexity_C}}},
      {"characteristics",
       {{"y", s.characteristics.y},
        {"targets", targets},
        {"scan_box", {s.characteristics.scan_box.lo, s.characteristics.scan_box.hi}},
        {"scan_count", s.characteristics.scan_count},
        {"tol", s.characteristics.tol}}},
      {"singular",
       {{"anchors", anchors},
        {"dt", s.singular.dt},
        {"max_steps", s.singular.max_steps},
        {"dx", s.singular.dx},
        {"window_steps", s.singular.window_steps}}},
      {"seed", s.seed},
  };
}

}  // namespace hjlayer
