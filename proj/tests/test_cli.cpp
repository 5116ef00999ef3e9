#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hjlayer/commands.hpp"

using namespace hjlayer;
namespace fs = std::filesystem;

namespace {

const std::string kProblems = HJLAYER_PROBLEMS_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hjlayer_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

const char* kMinimal = R"({
  "schema": "hjlayer.problem/1",
  "dimension": 1,
  "horizon": 1.0,
  "sigma": {"kind": "pwl", "breakpoints": [0.0], "slopes": [-1.0, 1.0]},
  "hamiltonian": {"breakpoints": [0.0, 1.0], "layers": [{"kind": "separable", "terms": []}]},
  "grids": {"x": {"box": [[-2.0, 2.0]], "counts": [41]}, "t_count": 5}
})";

double closed_form(double t, double x) {
  if (t <= 0.5) return std::fabs(x) + t - t * t;
  const double s = (t - 0.5) * (t - 0.5);
  return std::fabs(x) <= 2.0 * s ? x * x / (4.0 * s) + 0.25 : std::fabs(x) - s + 0.25;
}

}  // namespace

TEST(LoadSpec, GoldenDefaultsTheDualBoxFromSlopes) {
  const auto s = load_spec(kProblems + "/golden.json");
  ASSERT_EQ(s.dual.box.size(), 1u);
  EXPECT_EQ(s.dual.box[0].lo, -1.0);
  EXPECT_EQ(s.dual.box[0].hi, 1.0);
  EXPECT_EQ(s.dual.counts[0], 2001u);
  EXPECT_EQ(s.verify.semiconvexity_C, 8.0);
  EXPECT_NEAR(s.tolerances.diam_threshold, 3e-3, 1e-15);
}

TEST(LoadSpec, AutoSplitMatchesExplicitLayers) {
  const auto a = load_spec(kProblems + "/golden_auto.json");
  const auto b = load_spec(kProblems + "/golden.json");
  EXPECT_EQ(a.hamiltonian, b.hamiltonian);
}

TEST(LoadSpec, ZeroHorizonIsRejected) {
  std::string text = kMinimal;
  text.replace(text.find("\"horizon\": 1.0"), 14, "\"horizon\": 0.0");
  EXPECT_THROW(parse_spec(text), ValidationError);
}

TEST(LoadSpec, DentedSampledSigmaNamesTheNode) {
  nlohmann::json j = nlohmann::json::parse(kMinimal);
  std::vector<double> v;
  for (int i = 0; i < 41; ++i) {
    const double x = -2.0 + 0.1 * i;
    v.push_back(x * x);
  }
  v[17] += 0.1;
  j["sigma"] = {{"kind", "samples"}, {"grid", {{"box", {{-2.0, 2.0}}}, {"counts", {41}}}}, {"values", v}};
  try {
    parse_spec(j.dump());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("sigma not convex at node 17"), std::string::npos) << e.what();
  }
}

TEST(LoadSpec, UnknownFieldsAndBadSchema) {
  nlohmann::json j = nlohmann::json::parse(kMinimal);
  j["grids"]["typo"] = 1;
  EXPECT_THROW(parse_spec(j.dump()), ValidationError);
  j = nlohmann::json::parse(kMinimal);
  j["schema"] = "hjlayer.problem/0";
  EXPECT_THROW(parse_spec(j.dump()), ValidationError);
  j = nlohmann::json::parse(kMinimal);
  j.erase("sigma");
  EXPECT_THROW(parse_spec(j.dump()), ValidationError);
}

TEST(LoadSpec, ParseErrorReportsLine) {
  try {
    parse_spec("{\n  \"schema\": \"hjlayer.problem/1\",\n  \"dimension\": 1,,\n}");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(LoadSpec, InvalidInvariants) {
  nlohmann::json j = nlohmann::json::parse(kMinimal);
  j["dimension"] = 3;
  EXPECT_THROW(parse_spec(j.dump()), ValidationError);
  j = nlohmann::json::parse(kMinimal);
  j["grids"]["x"]["counts"] = {1};
  EXPECT_THROW(parse_spec(j.dump()), ValidationError);
  j = nlohmann::json::parse(kMinimal);
  j["sigma"]["slopes"] = {1.0, -1.0};
  EXPECT_THROW(parse_spec(j.dump()), ValidationError);
  j = nlohmann::json::parse(kMinimal);
  j["hamiltonian"]["layers"][0] = {{"kind", "separable"}, {"terms", {{{"g", {-1.0, 2.0}}, {"h", {0.0, 0.0, 1.0}}}}}};
  EXPECT_THROW(parse_spec(j.dump()), ValidationError);  // g changes sign inside the layer
}

TEST(LoadSpec, EchoRoundTrip) {
  for (const char* name : {"golden.json", "golden_auto.json", "golden_smoothed.json", "convex_2d.json"}) {
    const auto s = load_spec(kProblems + "/" + name);
    const auto again = parse_spec(to_json(s).dump());
    EXPECT_EQ(again, s) << name;
    EXPECT_EQ(to_json(again).dump(), to_json(s).dump()) << name;
  }
}

TEST(Csv, SeventeenSignificantDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(-3.0), "-3");
  EXPECT_EQ(std::stod(format_double(M_PI)), M_PI);
}

TEST(RunSolve, GoldenMatchesClosedFormAndIsDeterministic) {
  auto s = load_spec(kProblems + "/golden.json");
  s.t_count = 41;
  s.x.counts = {121};
  const auto a = scratch("solve_a"), b = scratch("solve_b");
  const auto rep = run_solve(s, a);
  run_solve(s, b);
  EXPECT_EQ(rep.exit_code, 0);
  EXPECT_EQ(slurp(a / "solution.csv"), slurp(b / "solution.csv"));
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  const auto rows = read_csv(a / "solution.csv");
  ASSERT_EQ(rows.size(), 1u + 41u * 121u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "x", "u", "l_diam"}));
  double prev_t = -1.0, prev_x = 0.0, err = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double t = std::stod(rows[i][0]), x = std::stod(rows[i][1]), u = std::stod(rows[i][2]);
    EXPECT_TRUE(t > prev_t || (t == prev_t && x > prev_x));
    prev_t = t;
    prev_x = x;
    err = std::max(err, std::fabs(u - closed_form(t, x)));
  }
  EXPECT_LE(err, 1e-3);
  EXPECT_EQ(slurp(a / "spec.echo.json"), to_json(s).dump(2) + "\n");
}

TEST(RunSolve, ZeroHamiltonianReproducesSigma) {
  const auto s = parse_spec(kMinimal);
  const auto out = scratch("solve_zero");
  run_solve(s, out);
  const auto rows = read_csv(out / "solution.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(std::stod(rows[i][2]), std::fabs(std::stod(rows[i][1])));
}

TEST(RunSolve, TwoDimensionalHeader) {
  auto s = load_spec(kProblems + "/convex_2d.json");
  s.t_count = 2;
  const auto out = scratch("solve_2d");
  run_solve(s, out);
  const auto rows = read_csv(out / "solution.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "x", "y", "u", "l_diam"}));
  EXPECT_EQ(rows.size(), 1u + 2u * 21u * 21u);
}

TEST(RunVerify, GoldenReport) {
  auto s = load_spec(kProblems + "/golden.json");
  s.verify.semiconvexity_samples = 20000;
  s.t_count = 101;
  const auto out = scratch("verify");
  const auto rep = run_verify(s, out);
  EXPECT_EQ(rep.exit_code, 0);
  const auto j = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(j["metrics"]["semiconvexity"]["violations"], 0);
  EXPECT_EQ(j["metrics"]["semiconvexity"]["C"], 8.0);
  EXPECT_NEAR(j["metrics"]["hopf"]["max_layered_minus_hopf"].get<double>(), 0.25, 1e-3);
  EXPECT_LE(j["metrics"]["hopf"]["max_hopf_minus_layered"].get<double>(), 1e-9);
  EXPECT_LE(j["metrics"]["pde_residual"]["max"].get<double>(), 1e-2);
  EXPECT_LE(j["metrics"]["gluing_error"].get<double>(), 1e-8);
  EXPECT_EQ(j["spec_digest"].get<std::string>().size(), 64u);
}

TEST(RunVerify, SingleConvexLayerHasNoGap) {
  auto s = load_spec(kProblems + "/convex_2d.json");
  s.verify.semiconvexity_samples = 500;
  s.t_count = 3;
  const auto rep = run_verify(s, scratch("verify_2d"));
  EXPECT_LE(std::fabs(rep.metrics["hopf"]["max_layered_minus_hopf"].get<double>()), 1e-12);
}

TEST(RunVerify, ToleranceFailureExitCode) {
  auto s = load_spec(kProblems + "/golden.json");
  s.verify.semiconvexity_samples = 100;
  s.t_count = 11;
  s.tolerances.residual_tol = 1e-12;
  EXPECT_EQ(run_verify(s, scratch("verify_fail")).exit_code, kExitTolerance);
}

TEST(RunCharacteristics, CurvesAndBackwardSearch) {
  auto s = load_spec(kProblems + "/golden_smoothed.json");
  const auto out = scratch("chars");
  const auto rep = run_characteristics(s, out);
  const auto rows = read_csv(out / "characteristics.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"curve_id", "t", "x", "v", "p", "type"}));
  EXPECT_EQ(rows.size(), 1u + s.characteristics.y.size() * s.t_count);
  EXPECT_LE(rep.metrics["max_type_I_mismatch"].get<double>(), 1e-4);
  const auto back = read_csv(out / "backward.csv");
  ASSERT_GE(back.size(), 2u);
  // target (1, 0): the time integral vanishes, so the single candidate is y = x0
  EXPECT_EQ(back[1][0], "0");
  EXPECT_NEAR(std::stod(back[1][3]), 0.0, 1e-10);
}

TEST(RunCharacteristics, KinkedSigmaIsAValidationProblem) {
  auto s = load_spec(kProblems + "/golden.json");
  s.characteristics.y = {0.0};
  EXPECT_THROW(run_characteristics(s, scratch("chars_kink")), InputError);
}

TEST(RunSingular, GoldenAnchor) {
  auto s = load_spec(kProblems + "/golden.json");
  s.t_count = 41;
  s.x.counts = {121};
  const auto out = scratch("singular");
  const auto rep = run_singular(s, out);
  const auto& a = rep.metrics["anchors"][0];
  EXPECT_TRUE(a["boundary_minus_dstar_nonempty"].get<bool>());
  EXPECT_TRUE(a["segment_in_level_set"].get<bool>());
  EXPECT_FALSE(a["propagation_predicted"].get<bool>());
  EXPECT_EQ(a["d_star_size"], 2);
  EXPECT_LE(a["arcs"][0]["end_t"].get<double>(), 0.05);
  EXPECT_EQ(a["arcs"][1]["steps"], 0);
  const auto pts = read_csv(out / "singular_points.csv");
  EXPECT_EQ(pts[0], (std::vector<std::string>{"t", "x", "l_diam"}));
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_LE(std::stod(pts[i][0]), 0.6);
  EXPECT_TRUE(fs::exists(out / "arcs.csv"));
}
