#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mvgf/experiments.hpp"
#include "mvgf/fpe.hpp"
#include "mvgf/models.hpp"
#include "mvgf/particles.hpp"
#include "mvgf/transport.hpp"

namespace mvgf {

/// Everything one CLI invocation needs. Serialized as nested JSON sections:
/// model, grid, initial, time, particles, transport, output.
struct ExperimentConfig {
  ModelSpec model;
  double half_width = 12.0;
  std::size_t n_cells = 1200;
  InitialSpec initial;

  double t_end = 2.0;
  std::size_t snapshots = 40;
  double cfl_safety = 0.45;
  std::string scheme = "balanced";

  std::size_t n_particles = 500;
  double dt = 1e-3;
  std::uint64_t master_seed = 20240601;
  std::string mode = "pde-coupled";
  std::size_t record_stride = 10;
  unsigned threads = 0;
  double kde_bandwidth = 0.0;

  TransportControls transport{8};
  /// Transport runs on its own, coarser grid over the same [-L, L].
  std::size_t transport_cells = 240;
  double t0 = 0.1;
  std::vector<double> deltas{0.04, 0.02};
  /// Second density for wh-distance, rescaled to the mass of `initial`.
  InitialSpec target{"stationary"};

  std::string output_dir = "mvgf_out";
};

/// Throws ValidationError on malformed JSON, unknown keys or wrong types.
/// Missing keys keep their defaults.
ExperimentConfig config_from_json(const std::string& text);
/// Canonical form (sorted keys, every field present).
std::string config_to_json(const ExperimentConfig& config, int indent = 2);

/// One initial-density object ({"kind": ..., "mean": ...}) with strict keys.
InitialSpec initial_from_json(const std::string& text);

/// Sets a dotted key such as "particles.n" or "transport.deltas". The value is
/// parsed as JSON when possible and taken as a string otherwise. A section key
/// takes an object whose keys are merged into the section.
void config_set(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Throws ValidationError when any section is out of range (builds the model).
void validate_config(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical JSON without the output section and the thread
/// count, neither of which changes results.
std::uint64_t config_hash(const ExperimentConfig& config);
std::string config_hash_hex(const ExperimentConfig& config);

FpeOptions fpe_options(const ExperimentConfig& config);
ParticleOptions particle_options(const ExperimentConfig& config);

}  // namespace mvgf
