#pragma once

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hjlayer/characteristics.hpp"
#include "hjlayer/problem.hpp"
#include "hjlayer/singularity.hpp"
#include "hjlayer/solver.hpp"

namespace hjlayer {

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitTolerance = 3 };

struct RunReport {
  std::string command;
  std::string spec_digest;
  std::vector<std::string> outputs;
  nlohmann::json metrics = nlohmann::json::object();
  int exit_code = kExitOk;

  nlohmann::json to_json() const {
    return {{"command", command}, {"spec_digest", spec_digest}, {"outputs", outputs}, {"metrics", metrics},
            {"exit_code", exit_code}};
  }
};

/// Shortest-exact decimal text for CSV cells.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw InputError("cannot write " + path.string());
    row_strings(header);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  template <class... Cells>
  void row(const Cells&... cells) {
    std::vector<std::string> v;
    (v.push_back(cell(cells)), ...);
    row_strings(v);
  }

private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }

  std::ofstream out_;
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

namespace detail {

inline std::string echo_text(const ProblemSpec& s) { return to_json(s).dump(2) + "\n"; }

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write " + p.string());
  out << text;
}

/// Shared prologue: output dir, echoed spec, digest.
inline RunReport begin_run(const std::string& command, const ProblemSpec& spec, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  RunReport r;
  r.command = command;
  const std::string echo = echo_text(spec);
  r.spec_digest = sha256_hex(echo);
  write_text(out / "spec.echo.json", echo);
  r.outputs.push_back("spec.echo.json");
  return r;
}

inline void finish_run(RunReport& r, const std::filesystem::path& out) {
  r.outputs.push_back("report.json");
  write_text(out / "report.json", r.to_json().dump(2) + "\n");
}

inline LayeredSolution build(const ProblemSpec& spec) {
  BuildOptions opts;
  opts.tie_rel = spec.tolerances.tie_rel;
  return build_layered_solution(make_sigma(spec), make_hamiltonian(spec), spec.dual.grid(), spec.sigma_grid.grid(),
                                opts);
}

inline void point_cells(std::vector<std::string>& row, const Point& x) {
  for (double v : x) row.push_back(format_double(v));
}

inline nlohmann::json point_json(const Point& x) {
  auto j = nlohmann::json::array();
  for (double v : x) j.push_back(v);
  return j;
}

inline std::vector<std::string> space_header(std::size_t dim) {
  return dim == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x", "y"};
}

}  // namespace detail

/// u and the l-set diameter on the (t, x) grid.
inline RunReport run_solve(const ProblemSpec& spec, const std::filesystem::path& out) {
  RunReport r = detail::begin_run("solve", spec, out);
  const LayeredSolution sol = detail::build(spec);
  const Grid xg = spec.x.grid();
  const auto xs = xg.points();

  auto header = std::vector<std::string>{"t"};
  for (const auto& h : detail::space_header(spec.dimension)) header.push_back(h);
  header.insert(header.end(), {"u", "l_diam"});
  CsvWriter csv(out / "solution.csv", header);
  double u_min = kPlusInfinity, u_max = -kPlusInfinity;
  std::size_t rows = 0;
  for (double t : spec.times()) {
    const SliceEvaluator u(sol, t);
    for (const auto& x : xs) {
      const auto v = u(x);
      std::vector<std::string> row{format_double(t)};
      detail::point_cells(row, x);
      row.push_back(format_double(v.value));
      row.push_back(format_double(v.argmax.diameter));
      csv.row_strings(row);
      u_min = std::min(u_min, v.value);
      u_max = std::max(u_max, v.value);
      ++rows;
    }
  }
  r.outputs.push_back("solution.csv");
  r.metrics = {{"rows", rows}, {"u_min", u_min}, {"u_max", u_max}, {"layers", sol.kernels().size()}};
  detail::finish_run(r, out);
  return r;
}

/// Semiconvexity, PDE residual off the singular set, layered-vs-Hopf comparison, gluing.
inline RunReport run_verify(const ProblemSpec& spec, const std::filesystem::path& out) {
  RunReport r = detail::begin_run("verify", spec, out);
  const LayeredSolution sol = detail::build(spec);
  const Grid xg = spec.x.grid();
  const auto times = spec.times();
  const auto& tol = spec.tolerances;

  SemiconvexityOptions so;
  so.samples = spec.verify.semiconvexity_samples;
  so.C = spec.verify.semiconvexity_C;
  so.seed = spec.seed;
  so.time = {0.0, spec.horizon};
  so.space = spec.x.box;
  so.rel_tol = tol.semiconvexity_rel_tol;
  const auto semi = check_semiconvexity(sol, so);

  const auto singular = detect_singular_points(sol, times, xg, tol.diam_threshold);
  std::vector<SpaceTimePoint> sing_pts;
  for (const auto& s : singular) sing_pts.push_back({s.t, s.x});
  const double exclusion = tol.exclusion_spacings * xg.max_spacing();
  const auto res = check_pde_residual(sol, times, xg, tol.fd_step, exclusion, sing_pts);

  // Hopf comparison: u_H <= u everywhere; the gap u - u_H measures the layering effect.
  double hopf_excess = -kPlusInfinity, gap = -kPlusInfinity;
  SpaceTimePoint gap_at;
  const auto xs = xg.points();
  for (double t : times) {
    const SliceEvaluator u(sol, t), uh(sol, t, true);
    for (const auto& x : xs) {
      const double a = u.value(x), b = uh.value(x);
      hopf_excess = std::max(hopf_excess, b - a);
      if (a - b > gap) {
        gap = a - b;
        gap_at = {t, x};
      }
    }
  }
  const double glue = gluing_error(sol, xg);

  const bool ok = semi.violations.empty() && res.max_residual <= tol.residual_tol && hopf_excess <= tol.hopf_tol &&
                  glue <= tol.gluing_tol;
  r.exit_code = ok ? kExitOk : kExitTolerance;
  r.metrics = {
      {"semiconvexity", {{"C", semi.C}, {"samples", semi.samples_tested}, {"violations", semi.violations.size()},
                         {"max_excess", semi.max_excess}}},
      {"pde_residual", {{"max", res.max_residual}, {"mean", res.mean_residual}, {"points", res.included},
                        {"argmax_t", res.argmax.t}, {"argmax_x", detail::point_json(res.argmax.x)},
                        {"exclusion_radius", exclusion}, {"tol", tol.residual_tol}}},
      {"singular_point_count", singular.size()},
      {"hopf", {{"max_hopf_minus_layered", hopf_excess}, {"max_layered_minus_hopf", gap},
                {"gap_argmax_t", gap_at.t}, {"gap_argmax_x", detail::point_json(gap_at.x)}, {"tol", tol.hopf_tol}}},
      {"gluing_error", glue},
      {"passed", ok},
  };
  detail::finish_run(r, out);
  return r;
}

/// Forward strips from the y list; backward search and classification at each target.
inline RunReport run_characteristics(const ProblemSpec& spec, const std::filesystem::path& out) {
  if (spec.dimension != 1) throw ValidationError("chars: characteristics are traced in one dimension");
  RunReport r = detail::begin_run("chars", spec, out);
  const LayeredSolution sol = detail::build(spec);
  const auto& sigma = sol.sigma();
  const auto& cs = spec.characteristics;
  const auto times = spec.times();
  const double mtol = spec.tolerances.momentum_tol;

  CsvWriter csv(out / "characteristics.csv", {"curve_id", "t", "x", "v", "p", "type"});
  double worst_mismatch = 0.0;
  std::size_t checked = 0;
  for (std::size_t id = 0; id < cs.y.size(); ++id) {
    const Characteristic ch = emit_characteristic(sigma, sol.hamiltonian_ptr(), Point{cs.y[id]});
    bool consistent_prefix = true;
    for (double t : times) {
      const Point x = ch.position(t);
      const double v = ch.value(t);
      const auto e = sol.eval(t, x);
      const CharacteristicType type = classify(ch.momentum(), sol, t, x, mtol);
      // u = v is expected while the strip is TypeI and l is a singleton.
      consistent_prefix = consistent_prefix && type == CharacteristicType::TypeI && is_singleton(e.argmax, sol.dual_grid());
      if (consistent_prefix) {
        worst_mismatch = std::max(worst_mismatch, std::fabs(e.value - v));
        ++checked;
      }
      csv.row(id, t, x[0], v, ch.momentum()[0], std::string(to_string(type)));
    }
  }
  r.outputs.push_back("characteristics.csv");

  CsvWriter bcsv(out / "backward.csv", {"target_id", "t", "x", "y", "p", "residual", "type"});
  BackwardSearchOptions bo;
  bo.y_box = cs.scan_box;
  bo.scan_count = cs.scan_count;
  bo.tol = cs.tol;
  auto found = nlohmann::json::array();
  for (std::size_t id = 0; id < cs.targets.size(); ++id) {
    const auto [t0, x0] = cs.targets[id];
    auto res = find_backward(sigma, sol.hamiltonian(), t0, x0, bo);
    classify_all(res, sol, t0, x0, mtol);
    std::size_t type1 = 0;
    for (const auto& c : res.candidates) {
      bcsv.row(id, t0, x0, c.y, c.p, c.residual, std::string(to_string(*c.type)));
      type1 += *c.type == CharacteristicType::TypeI;
    }
    found.push_back({{"target_id", id}, {"candidates", res.candidates.size()}, {"type_I", type1}});
  }
  r.outputs.push_back("backward.csv");
  r.metrics = {{"curves", cs.y.size()},
               {"type_I_samples_checked", checked},
               {"max_type_I_mismatch", worst_mismatch},
               {"backward", found}};
  detail::finish_run(r, out);
  return r;
}

/// Singular points on the grid; gradient sets, propagation predicate and traced arcs per anchor.
inline RunReport run_singular(const ProblemSpec& spec, const std::filesystem::path& out) {
  RunReport r = detail::begin_run("singular", spec, out);
  const LayeredSolution sol = detail::build(spec);
  const Grid xg = spec.x.grid();
  const auto& ss = spec.singular;
  const double thr = spec.tolerances.diam_threshold;
  const auto points = detect_singular_points(sol, spec.times(), xg, thr);

  auto header = std::vector<std::string>{"t"};
  for (const auto& h : detail::space_header(spec.dimension)) header.push_back(h);
  header.push_back("l_diam");
  CsvWriter csv(out / "singular_points.csv", header);
  for (const auto& p : points) {
    std::vector<std::string> row{format_double(p.t)};
    detail::point_cells(row, p.x);
    row.push_back(format_double(p.diameter));
    csv.row_strings(row);
  }
  r.outputs.push_back("singular_points.csv");

  // Automatic anchors: the detected points at the latest time carrying any.
  std::vector<std::pair<double, Point>> anchors;
  if (ss.auto_anchor) {
    if (!points.empty()) {
      const double last = points.back().t;
      for (const auto& p : points)
        if (p.t == last) anchors.push_back({p.t, p.x});
    }
  } else {
    for (const auto& a : ss.anchors) anchors.push_back({a[0], Point{a[1]}});
  }

  auto anchor_json = nlohmann::json::array();
  std::optional<CsvWriter> arcs;
  if (spec.dimension == 1) arcs.emplace(out / "arcs.csv", std::vector<std::string>{"arc_id", "direction", "t", "x", "l_diam"});
  std::size_t arc_id = 0;
  for (const auto& [t0, x0] : anchors) {
    const auto prop = check_propagation_condition(sol, t0, x0);
    auto dstar = nlohmann::json::array();
    for (const auto& g : prop.sets.d_star) dstar.push_back({{"p", g.p}, {"q", detail::point_json(g.q)}});
    auto dminus = nlohmann::json::array();
    for (const auto& g : prop.sets.d_minus) dminus.push_back({{"p", g.p}, {"q", detail::point_json(g.q)}});
    nlohmann::json a = {{"t", t0},
                        {"x", detail::point_json(x0)},
                        {"d_star_size", prop.sets.d_star.size()},
                        {"d_minus_vertices", dminus},
                        {"d_star_extremes", dstar.empty() ? nlohmann::json::array()
                                                          : nlohmann::json::array({dstar.front(), dstar.back()})},
                        {"boundary_minus_dstar_nonempty", prop.sets.boundary_minus_dstar_nonempty},
                        {"hull_exact", prop.sets.hull_exact},
                        {"alpha", prop.alpha},
                        {"segment_in_level_set", prop.segment_in_level_set},
                        {"propagation_predicted", prop.predicted}};
    if (arcs) {
      ArcOptions ao;
      ao.dt = ss.dt;
      ao.max_steps = ss.max_steps;
      ao.diam_threshold = thr;
      ao.dx = ss.dx;
      ao.window_steps = ss.window_steps;
      auto traced = nlohmann::json::array();
      for (ArcDirection dir : {ArcDirection::Backward, ArcDirection::Forward}) {
        const SingularArc arc = trace_singular_arc(sol, t0, x0[0], dir, ao);
        const char* name = dir == ArcDirection::Forward ? "forward" : "backward";
        for (const auto& s : arc.samples) arcs->row(arc_id, std::string(name), s.t, s.x, s.diameter);
        traced.push_back({{"arc_id", arc_id},
                          {"direction", name},
                          {"steps", arc.samples.size() - 1},
                          {"end_t", arc.samples.back().t},
                          {"end_x", arc.samples.back().x},
                          {"lipschitz", arc.lipschitz},
                          {"terminated", arc.terminated_reason}});
        ++arc_id;
      }
      a["arcs"] = traced;
    }
    anchor_json.push_back(a);
  }
  if (arcs) r.outputs.push_back("arcs.csv");
  r.metrics = {{"singular_point_count", points.size()}, {"diam_threshold", thr}, {"anchors", anchor_json}};
  detail::finish_run(r, out);
  return r;
}

}  // namespace hjlayer
