// Command-line driver: solve | verify | chars | singular.
#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hjlayer/commands.hpp"

int main(int argc, char** argv) {
  using namespace hjlayer;
  using Runner = std::function<RunReport(const ProblemSpec&, const std::filesystem::path&)>;
  const std::map<std::string, Runner> runners = {
      {"solve", run_solve}, {"verify", run_verify}, {"chars", run_characteristics}, {"singular", run_singular}};
  const std::map<std::string, std::string> help = {
      {"solve", "sample u and the l-set diameter on the t-x grid"},
      {"verify", "semiconvexity, PDE residual, global Hopf comparison and gluing checks"},
      {"chars", "forward characteristics and backward foot-point search (1D)"},
      {"singular", "detect singular points and trace arcs through anchors (1D)"}};

  CLI::App app{"Layered Hopf-formula solver for Hamilton-Jacobi equations"};
  app.require_subcommand(1);
  std::string spec_path, out_dir;
  std::optional<std::uint64_t> seed;
  for (const auto& [name, _] : runners) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--spec", spec_path, "problem spec (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "overrides the spec seed");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    ProblemSpec spec = load_spec(spec_path);
    if (seed) spec.seed = *seed;
    const auto start = std::chrono::steady_clock::now();
    const RunReport rep = runners.at(command)(spec, out_dir);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s: wrote", command.c_str());
    for (const auto& o : rep.outputs) std::printf(" %s", o.c_str());
    std::printf(" to %s (%.2f s)\n", out_dir.c_str(), secs);
    if (rep.exit_code != kExitOk) std::fprintf(stderr, "%s: tolerance check failed, see report.json\n", command.c_str());
    return rep.exit_code;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const StructuralError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
