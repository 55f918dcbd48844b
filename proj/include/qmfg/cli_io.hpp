#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qmfg/model.hpp"
#include "qmfg/population_sim.hpp"
#include "qmfg/target_mfg.hpp"
#include "qmfg/threshold_mfg.hpp"

namespace qmfg {

enum class Command {
  solve_target,
  solve_threshold,
  simulate,
  clt_check,
  nash_check,
  sweep_alpha,
  compare_formulations,
};

const char* command_name(Command c);

struct ExperimentSpec {
  Command command = Command::solve_target;
  RunConfig config;
  std::string output_dir = "out";
  std::vector<double> alpha_list;                 // sweeps
  std::vector<int> n_list = {250, 1000, 4000};    // rate checks
  std::optional<Formulation> formulation;         // restricts commands that run both
  int n_cells = 1024;                             // threshold spatial resolution
  FixedPointConfig fixed_point;
};

/// Runs the experiment, writing a manifest, per-command CSV artifacts and a
/// summary into a fresh subdirectory of `output_dir` named by the manifest
/// hash. Returns the process exit status (0 on success).
int run(const ExperimentSpec& spec);

/// Directory the spec's artifacts will land in.
std::filesystem::path artifact_dir(const ExperimentSpec& spec);

/// 64-bit FNV-1a content hash, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& content);

/// Parses argv into a spec (CLI11 under the hood) and runs it.
int main_cli(int argc, char** argv);

void write_fbode_csv(const FbodeSolution& solution, const std::filesystem::path& path);

}  // namespace qmfg
