#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace pathdens::cli {

struct RunContext {
  Scenario scenario;
  std::filesystem::path out;
  std::size_t workers = 1;
  unsigned mesh_doubling = 0;
};

// Runs one command, writes <command>.csv and <command>_summary.json into ctx.out
// and returns the one-line summary.
std::string run_command(const std::string& command, const RunContext& ctx);

const std::vector<std::string>& command_names();
// Column documentation for --help.
std::string command_help();

}  // namespace pathdens::cli
