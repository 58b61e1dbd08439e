#include "mvgf/config.hpp"

#include <cmath>
#include <cstdio>
#include <type_traits>

#include "json.hpp"
#include "mvgf/errors.hpp"

namespace mvgf {

namespace {

using nlohmann::json;

json initial_to_json(const InitialSpec& s) {
  return {{"kind", s.kind},       {"mean", s.mean},     {"variance", s.variance},
          {"mass", s.mass},       {"lower_c", s.lower_c}, {"upper_c", s.upper_c},
          {"weight", s.weight},   {"shift", s.shift},   {"depth", s.depth}};
}

json to_json_tree(const ExperimentConfig& c) {
  const auto& t = c.transport;
  return {
      {"model", {{"family", c.model.family}, {"gamma", c.model.gamma}, {"alpha", c.model.alpha}}},
      {"grid", {{"half_width", c.half_width}, {"n_cells", c.n_cells}}},
      {"initial", initial_to_json(c.initial)},
      {"time", {{"t_end", c.t_end}, {"snapshots", c.snapshots}, {"cfl_safety", c.cfl_safety}, {"scheme", c.scheme}}},
      {"particles",
       {{"n", c.n_particles},
        {"dt", c.dt},
        {"master_seed", c.master_seed},
        {"mode", c.mode},
        {"record_stride", c.record_stride},
        {"threads", c.threads},
        {"kde_bandwidth", c.kde_bandwidth}}},
      {"transport",
       {{"n_time", t.n_time},
        {"n_cells", c.transport_cells},
        {"max_iters", t.max_iters},
        {"primal_tol", t.primal_tol},
        {"constraint_tol", t.constraint_tol},
        {"tau", t.tau},
        {"sigma", t.sigma},
        {"check_every", t.check_every},
        {"t0", c.t0},
        {"deltas", c.deltas},
        {"target", initial_to_json(c.target)}}},
      {"output", {{"directory", c.output_dir}}},
  };
}

// Reads the keys of one object section, rejecting anything unknown.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ValidationError("config: section '" + name_ + "' must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.push_back(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_unsigned_v<T>) {
      if (!it->is_number_unsigned()) {
        throw ValidationError("config: '" + name_ + "." + key + "' must be a non-negative integer");
      }
    }
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: '" + name_ + "." + key + "' has the wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.push_back(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      bool known = false;
      for (const auto& s : seen_) known = known || s == k;
      if (!known) throw ValidationError("config: unknown key '" + name_ + "." + k + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::vector<std::string> seen_;
};

void read_initial(const json& j, const std::string& name, InitialSpec& s) {
  Section sec(j, name);
  sec.read("kind", s.kind);
  sec.read("mean", s.mean);
  sec.read("variance", s.variance);
  sec.read("mass", s.mass);
  sec.read("lower_c", s.lower_c);
  sec.read("upper_c", s.upper_c);
  sec.read("weight", s.weight);
  sec.read("shift", s.shift);
  sec.read("depth", s.depth);
  sec.finish();
}

ExperimentConfig from_json_tree(const json& root) {
  ExperimentConfig c;
  Section top(root, "config");
  if (const json* j = top.sub("model")) {
    Section s(*j, "model");
    s.read("family", c.model.family);
    s.read("gamma", c.model.gamma);
    s.read("alpha", c.model.alpha);
    s.finish();
  }
  if (const json* j = top.sub("grid")) {
    Section s(*j, "grid");
    s.read("half_width", c.half_width);
    s.read("n_cells", c.n_cells);
    s.finish();
  }
  if (const json* j = top.sub("initial")) read_initial(*j, "initial", c.initial);
  if (const json* j = top.sub("time")) {
    Section s(*j, "time");
    s.read("t_end", c.t_end);
    s.read("snapshots", c.snapshots);
    s.read("cfl_safety", c.cfl_safety);
    s.read("scheme", c.scheme);
    s.finish();
  }
  if (const json* j = top.sub("particles")) {
    Section s(*j, "particles");
    s.read("n", c.n_particles);
    s.read("dt", c.dt);
    s.read("master_seed", c.master_seed);
    s.read("mode", c.mode);
    s.read("record_stride", c.record_stride);
    s.read("threads", c.threads);
    s.read("kde_bandwidth", c.kde_bandwidth);
    s.finish();
  }
  if (const json* j = top.sub("transport")) {
    Section s(*j, "transport");
    s.read("n_time", c.transport.n_time);
    s.read("n_cells", c.transport_cells);
    s.read("max_iters", c.transport.max_iters);
    s.read("primal_tol", c.transport.primal_tol);
    s.read("constraint_tol", c.transport.constraint_tol);
    s.read("tau", c.transport.tau);
    s.read("sigma", c.transport.sigma);
    s.read("check_every", c.transport.check_every);
    s.read("t0", c.t0);
    s.read("deltas", c.deltas);
    if (const json* t = s.sub("target")) read_initial(*t, "transport.target", c.target);
    s.finish();
  }
  if (const json* j = top.sub("output")) {
    Section s(*j, "output");
    s.read("directory", c.output_dir);
    s.finish();
  }
  top.finish();
  return c;
}

json parse_or_throw(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) { return from_json_tree(parse_or_throw(text)); }

InitialSpec initial_from_json(const std::string& text) {
  InitialSpec s;
  read_initial(parse_or_throw(text), "initial", s);
  return s;
}

std::string config_to_json(const ExperimentConfig& config, int indent) { return to_json_tree(config).dump(indent); }

void config_set(ExperimentConfig& config, const std::string& key, const std::string& value) {
  if (key.empty()) throw ValidationError("config: empty key");
  json v;
  try {
    v = json::parse(value);
  } catch (const json::parse_error&) {
    v = value;
  }
  json tree = to_json_tree(config);
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty() || !node->is_object() || !node->contains(part)) {
      throw ValidationError("config: unknown key '" + key + "'");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object() && !v.is_object()) {
    throw ValidationError("config: '" + key + "' is a section and needs a JSON object");
  }
  // Numbers typed as text ("1e-3") parse as JSON numbers; strings stay strings.
  // A section given as an object replaces the listed keys only.
  if (node->is_object()) {
    node->update(v);
  } else {
    *node = v;
  }
  config = from_json_tree(tree);
}

void validate_config(const ExperimentConfig& c) {
  MobilityModel::build(c.model);
  if (!(c.half_width > 0.0) || !std::isfinite(c.half_width)) throw ValidationError("config: grid.half_width must be positive");
  if (c.n_cells < 4) throw ValidationError("config: grid.n_cells must be at least 4");
  if (!(c.t_end > 0.0) || !std::isfinite(c.t_end)) throw ValidationError("config: time.t_end must be positive");
  if (c.snapshots < 1) throw ValidationError("config: time.snapshots must be at least 1");
  if (!(c.cfl_safety > 0.0 && c.cfl_safety <= 1.0)) throw ValidationError("config: time.cfl_safety must be in (0, 1]");
  if (c.scheme != "balanced" && c.scheme != "central" && c.scheme != "upwind") {
    throw ValidationError("config: time.scheme must be balanced, central or upwind");
  }
  if (c.n_particles < 1) throw ValidationError("config: particles.n must be positive");
  if (!(c.dt > 0.0)) throw ValidationError("config: particles.dt must be positive");
  if (c.mode != "pde-coupled" && c.mode != "kde") throw ValidationError("config: particles.mode must be pde-coupled or kde");
  if (c.record_stride < 1) throw ValidationError("config: particles.record_stride must be positive");
  if (c.kde_bandwidth < 0.0) throw ValidationError("config: particles.kde_bandwidth must be >= 0");
  const auto& t = c.transport;
  if (t.n_time < 1 || t.max_iters < 1 || t.check_every < 1) {
    throw ValidationError("config: transport.n_time, max_iters and check_every must be positive");
  }
  if (!(t.primal_tol > 0.0) || !(t.constraint_tol > 0.0)) throw ValidationError("config: transport tolerances must be positive");
  if (t.tau < 0.0 || t.sigma < 0.0) throw ValidationError("config: transport.tau and sigma must be >= 0");
  if (c.transport_cells < 4) throw ValidationError("config: transport.n_cells must be at least 4");
  if (c.t0 < 0.0) throw ValidationError("config: transport.t0 must be >= 0");
  if (c.deltas.empty()) throw ValidationError("config: transport.deltas must not be empty");
  for (std::size_t k = 0; k < c.deltas.size(); ++k) {
    if (!(c.deltas[k] > 0.0) || (k > 0 && !(c.deltas[k] < c.deltas[k - 1]))) {
      throw ValidationError("config: transport.deltas must be positive and strictly decreasing");
    }
  }
  if (c.output_dir.empty()) throw ValidationError("config: output.directory must not be empty");
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  json tree = to_json_tree(config);
  tree.erase("output");
  tree["particles"].erase("threads");
  const std::string s = tree.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash_hex(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  return buf;
}

FpeOptions fpe_options(const ExperimentConfig& c) {
  FpeOptions o;
  o.cfl_safety = c.cfl_safety;
  o.scheme = c.scheme == "central" ? FluxScheme::Central : c.scheme == "upwind" ? FluxScheme::Upwind : FluxScheme::Balanced;
  return o;
}

ParticleOptions particle_options(const ExperimentConfig& c) {
  ParticleOptions o;
  o.n = c.n_particles;
  o.t_end = c.t_end;
  o.dt = c.dt;
  o.master_seed = c.master_seed;
  o.record_stride = c.record_stride;
  o.threads = c.threads;
  o.kde_bandwidth = c.kde_bandwidth;
  return o;
}

}  // namespace mvgf
