#pragma once

#include <string>
#include <vector>

#include "mvgf/config.hpp"

namespace mvgf {

/// Outcome of one subcommand: a human-readable summary, the files written and
/// whether the run's own checks held (verify and reproduce report them).
struct RunReport {
  std::string text;
  std::vector<std::string> files;
  bool passed = true;
};

/// Subcommands: fpe-solve, energy-report, particles, metric-derivative,
/// wh-distance, reproduce (argument "fig1".."fig8") and verify (argument: comma
/// separated criteria, empty for all). Artifacts go to config.output_dir.
/// Throws ValidationError for bad configs or arguments, NumericalError when a
/// module fails.
RunReport run_command(const ExperimentConfig& config, const std::string& command,
                      const std::string& argument = {});

/// Lines every emitted file starts with: version, config hash, command and,
/// for stochastic commands, the master seed.
std::vector<std::string> provenance_header(const ExperimentConfig& config, const std::string& command,
                                           bool with_seed);

/// Standalone matplotlib script plotting the reproduce CSVs for one figure.
std::string plot_script(int figure);

}  // namespace mvgf
