#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "commands.hpp"
#include "pathdens/errors.hpp"
#include "pathdens/parallel.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kDivergence = 3;

int fail(int code, const std::string& what) {
  std::cerr << "pathdens: " << what << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace pathdens;
  CLI::App app{"Path-dependent SDE density diagnostics", "pathdens"};
  app.footer(cli::command_help());
  std::string command;
  std::string scenario_file;
  std::string out_dir;
  std::size_t workers = 0;
  unsigned mesh_doubling = 0;
  app.add_option("command", command, "simulate | malliavin | hormander | master-check | rough-check | delay-lift | density")
      ->required()
      ->check(CLI::IsMember(cli::command_names()));
  app.add_option("--scenario", scenario_file, "scenario JSON file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--workers", workers, "worker threads (default: PATHDENS_WORKERS, else 1)");
  app.add_option("--mesh-doubling", mesh_doubling, "number of mesh doublings")->check(CLI::Range(0u, 10u));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    cli::RunContext ctx{cli::load_scenario(scenario_file), out_dir, resolve_workers(workers), mesh_doubling};
    std::cout << cli::run_command(command, ctx) << '\n';
    return kOk;
  } catch (const DivergenceError& e) {
    return fail(kDivergence, fmt::format("divergence at step {}: {}", e.step(), e.what()));
  } catch (const NumericalError& e) {
    return fail(kDivergence, e.what());
  } catch (const cli::ScenarioError& e) {
    return fail(kValidation, e.what());
  } catch (const ConfigurationError& e) {
    return fail(kValidation, e.what());
  } catch (const DomainError& e) {
    return fail(kValidation, e.what());
  } catch (const ContractError& e) {
    return fail(kValidation, e.what());
  } catch (const ResourceError& e) {
    return fail(kValidation, e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
}
