#include "mvgf/mvgf.h"

#include <algorithm>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "mvgf/config.hpp"
#include "mvgf/errors.hpp"
#include "mvgf/experiments.hpp"
#include "mvgf/fpe.hpp"
#include "mvgf/functionals.hpp"
#include "mvgf/models.hpp"
#include "mvgf/runner.hpp"
#include "mvgf/transport.hpp"

struct mvgf_model {
  mvgf::MobilityModel model;
};
struct mvgf_field {
  mvgf::DensityField field;
};
struct mvgf_curve {
  mvgf::DensityCurve curve;
};
struct mvgf_config {
  mvgf::ExperimentConfig config;
  std::string json;
};
struct mvgf_report {
  mvgf::RunReport report;
};

namespace {

thread_local std::string last_error;

// Runs body and maps exceptions to status codes.
template <class Body>
mvgf_status guard(Body&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const mvgf::ValidationError& e) {
    last_error = e.what();
    return MVGF_VALIDATION_ERROR;
  } catch (const mvgf::NumericalError& e) {
    last_error = e.what();
    return MVGF_NUMERICAL_ERROR;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return MVGF_INTERNAL_ERROR;
  } catch (const std::exception& e) {
    last_error = e.what();
    return MVGF_INTERNAL_ERROR;
  } catch (...) {
    last_error = "unknown error";
    return MVGF_INTERNAL_ERROR;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw mvgf::ValidationError(what);
}

mvgf::Derived derived(mvgf_function which) {
  switch (which) {
    case MVGF_FN_G: return mvgf::Derived::G;
    case MVGF_FN_ETA: return mvgf::Derived::Eta;
    case MVGF_FN_PHI: return mvgf::Derived::Phi;
    case MVGF_FN_H: return mvgf::Derived::H;
    case MVGF_FN_PSI: return mvgf::Derived::Psi;
    default: throw mvgf::ValidationError("unknown model function");
  }
}

}  // namespace

extern "C" {

const char* mvgf_version(void) { return MVGF_VERSION; }
const char* mvgf_last_error(void) { return last_error.c_str(); }

mvgf_status mvgf_model_create(const char* family, double parameter, mvgf_model** out) {
  return guard([&] {
    require(family && out, "mvgf_model_create: null argument");
    mvgf::ModelSpec spec;
    spec.family = family;
    spec.gamma = parameter;
    spec.alpha = parameter;
    *out = new mvgf_model{mvgf::MobilityModel::build(spec)};
    return MVGF_OK;
  });
}

void mvgf_model_destroy(mvgf_model* model) { delete model; }

mvgf_status mvgf_model_eval(const mvgf_model* m, mvgf_function which, double s, double* out) {
  return guard([&] {
    require(m && out, "mvgf_model_eval: null argument");
    require(s >= 0.0, "mvgf_model_eval: argument must be >= 0");
    if (const auto sat = m->model.saturation(); sat && s > *sat) {
      throw mvgf::ValidationError("mvgf_model_eval: argument beyond the saturation level");
    }
    if (which == MVGF_FN_B) {
      *out = m->model.b(s);
    } else if (which == MVGF_FN_F) {
      *out = m->model.f(s);
    } else {
      *out = m->model.eval(derived(which), s);
    }
    return MVGF_OK;
  });
}

mvgf_status mvgf_model_critical_mass(const mvgf_model* m, double* out) {
  return guard([&] {
    require(m && out, "mvgf_model_critical_mass: null argument");
    *out = mvgf::critical_mass(m->model, 1);
    return MVGF_OK;
  });
}

mvgf_status mvgf_field_create(double half_width, size_t n_cells, const double* values, double time,
                              mvgf_field** out) {
  return guard([&] {
    require(values && out, "mvgf_field_create: null argument");
    mvgf::Grid1D grid(half_width, n_cells);
    *out = new mvgf_field{mvgf::DensityField(grid, std::vector<double>(values, values + n_cells), time)};
    return MVGF_OK;
  });
}

mvgf_status mvgf_field_initial(const mvgf_model* m, double half_width, size_t n_cells, const char* initial_json,
                               mvgf_field** out) {
  return guard([&] {
    require(m && out, "mvgf_field_initial: null argument");
    const auto spec = initial_json ? mvgf::initial_from_json(initial_json) : mvgf::InitialSpec{};
    *out = new mvgf_field{mvgf::make_initial(m->model, mvgf::Grid1D(half_width, n_cells), spec)};
    return MVGF_OK;
  });
}

void mvgf_field_destroy(mvgf_field* field) { delete field; }
size_t mvgf_field_size(const mvgf_field* f) { return f ? f->field.size() : 0; }
double mvgf_field_time(const mvgf_field* f) { return f ? f->field.time() : 0.0; }
double mvgf_field_mass(const mvgf_field* f) { return f ? f->field.mass() : 0.0; }

mvgf_status mvgf_field_values(const mvgf_field* f, double* out, size_t capacity) {
  return guard([&] {
    require(f && (out || capacity == 0), "mvgf_field_values: null argument");
    const auto& v = f->field.values();
    std::copy_n(v.begin(), std::min(capacity, v.size()), out);
    return MVGF_OK;
  });
}

mvgf_status mvgf_evolve(const mvgf_model* m, const mvgf_field* init, double t_end, size_t snapshots,
                        mvgf_curve** out) {
  return guard([&] {
    require(m && init && out, "mvgf_evolve: null argument");
    require(snapshots >= 2, "mvgf_evolve: need at least two snapshots");
    const double t0 = init->field.time();
    std::vector<double> times;
    for (size_t k = 1; k + 1 < snapshots; ++k) {
      times.push_back(t0 + (t_end - t0) * static_cast<double>(k) / static_cast<double>(snapshots - 1));
    }
    *out = new mvgf_curve{mvgf::evolve(m->model, init->field, t_end, times)};
    return MVGF_OK;
  });
}

void mvgf_curve_destroy(mvgf_curve* curve) { delete curve; }
size_t mvgf_curve_size(const mvgf_curve* c) { return c ? c->curve.size() : 0; }

mvgf_status mvgf_curve_time(const mvgf_curve* c, size_t k, double* out) {
  return guard([&] {
    require(c && out, "mvgf_curve_time: null argument");
    require(k < c->curve.size(), "mvgf_curve_time: snapshot index out of range");
    *out = c->curve.times()[k];
    return MVGF_OK;
  });
}

mvgf_status mvgf_curve_field(const mvgf_curve* c, size_t k, mvgf_field** out) {
  return guard([&] {
    require(c && out, "mvgf_curve_field: null argument");
    require(k < c->curve.size(), "mvgf_curve_field: snapshot index out of range");
    *out = new mvgf_field{c->curve[k]};
    return MVGF_OK;
  });
}

mvgf_status mvgf_free_energy(const mvgf_model* m, const mvgf_field* p, double* out) {
  return guard([&] {
    require(m && p && out, "mvgf_free_energy: null argument");
    *out = mvgf::free_energy(m->model, p->field);
    return MVGF_OK;
  });
}

mvgf_status mvgf_dissipation(const mvgf_model* m, const mvgf_field* p, double* out) {
  return guard([&] {
    require(m && p && out, "mvgf_dissipation: null argument");
    *out = mvgf::dissipation(m->model, p->field);
    return MVGF_OK;
  });
}

mvgf_status mvgf_relative_entropy(const mvgf_model* m, const mvgf_field* p, const mvgf_field* q, double* out) {
  return guard([&] {
    require(m && p && q && out, "mvgf_relative_entropy: null argument");
    *out = mvgf::relative_entropy(m->model, p->field, q->field);
    return MVGF_OK;
  });
}

mvgf_status mvgf_wh_distance(const mvgf_model* m, const mvgf_field* p0, const mvgf_field* p1, size_t n_time,
                             double* out) {
  return guard([&] {
    require(m && p0 && p1 && out, "mvgf_wh_distance: null argument");
    mvgf::TransportControls controls;
    controls.n_time = n_time;
    const auto sol = mvgf::wh_distance({m->model, p0->field, p1->field, controls});
    if (!sol.converged) throw mvgf::NumericalError("mvgf_wh_distance: primal-dual iteration did not converge");
    *out = sol.distance;
    return MVGF_OK;
  });
}

mvgf_status mvgf_w2_quantile(const mvgf_field* p0, const mvgf_field* p1, double* out) {
  return guard([&] {
    require(p0 && p1 && out, "mvgf_w2_quantile: null argument");
    *out = mvgf::w2_quantile_oracle(p0->field, p1->field);
    return MVGF_OK;
  });
}

mvgf_status mvgf_config_create(const char* json, mvgf_config** out) {
  return guard([&] {
    require(out != nullptr, "mvgf_config_create: null argument");
    *out = new mvgf_config{json ? mvgf::config_from_json(json) : mvgf::ExperimentConfig{}, {}};
    return MVGF_OK;
  });
}

mvgf_status mvgf_config_load(const char* path, mvgf_config** out) {
  return guard([&] {
    require(path && out, "mvgf_config_load: null argument");
    std::ifstream in(path);
    if (!in) throw mvgf::ValidationError(std::string("cannot read config file ") + path);
    std::stringstream ss;
    ss << in.rdbuf();
    *out = new mvgf_config{mvgf::config_from_json(ss.str()), {}};
    return MVGF_OK;
  });
}

void mvgf_config_destroy(mvgf_config* config) { delete config; }

mvgf_status mvgf_config_set(mvgf_config* c, const char* key, const char* value) {
  return guard([&] {
    require(c && key && value, "mvgf_config_set: null argument");
    mvgf::config_set(c->config, key, value);
    return MVGF_OK;
  });
}

mvgf_status mvgf_config_validate(const mvgf_config* c) {
  return guard([&] {
    require(c != nullptr, "mvgf_config_validate: null argument");
    mvgf::validate_config(c->config);
    return MVGF_OK;
  });
}

const char* mvgf_config_json(mvgf_config* c) {
  if (!c) return "";
  c->json = mvgf::config_to_json(c->config);
  return c->json.c_str();
}

uint64_t mvgf_config_hash(const mvgf_config* c) { return c ? mvgf::config_hash(c->config) : 0; }

mvgf_status mvgf_run(const mvgf_config* c, const char* command, const char* argument, mvgf_report** out) {
  return guard([&] {
    require(c && command && out, "mvgf_run: null argument");
    *out = nullptr;
    auto report = mvgf::run_command(c->config, command, argument ? argument : "");
    const bool passed = report.passed;
    *out = new mvgf_report{std::move(report)};
    return passed ? MVGF_OK : MVGF_CHECK_FAILED;
  });
}

void mvgf_report_destroy(mvgf_report* report) { delete report; }
const char* mvgf_report_text(const mvgf_report* r) { return r ? r->report.text.c_str() : ""; }
int mvgf_report_passed(const mvgf_report* r) { return r && r->report.passed ? 1 : 0; }
size_t mvgf_report_file_count(const mvgf_report* r) { return r ? r->report.files.size() : 0; }

const char* mvgf_report_file(const mvgf_report* r, size_t k) {
  return r && k < r->report.files.size() ? r->report.files[k].c_str() : "";
}

}  // extern "C"
