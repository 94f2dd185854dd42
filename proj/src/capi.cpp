#include "nlpme.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "config.hpp"
#include "diagnostics.hpp"
#include "experiments.hpp"
#include "fracops.hpp"
#include "grid.hpp"
#include "stepper.hpp"

namespace {

thread_local std::string g_last_error;

struct GridHandle {
  nlpme::GridPtr grid;
};
struct FieldHandle {
  nlpme::Field field;
};

nlpme::GridPtr grid_of(const nlpme_grid* g) {
  return reinterpret_cast<const GridHandle*>(g)->grid;
}
const nlpme::Field& field_of(const nlpme_field* f) {
  return reinterpret_cast<const FieldHandle*>(f)->field;
}
nlpme_field* wrap(nlpme::Field f) {
  return reinterpret_cast<nlpme_field*>(new FieldHandle{std::move(f)});
}

template <typename Fn>
nlpme_status guarded(Fn&& fn) {
  try {
    fn();
    return NLPME_OK;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return NLPME_ERR_INVALID_ARGUMENT;
  } catch (const nlpme::ConfigError& e) {
    g_last_error = e.what();
    return NLPME_ERR_CONFIG;
  } catch (const nlpme::QuadratureError& e) {
    g_last_error = e.what();
    return NLPME_ERR_QUADRATURE;
  } catch (const nlpme::NumericalAbort& e) {
    g_last_error = e.what();
    return NLPME_ERR_NUMERICAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NLPME_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return NLPME_ERR_INTERNAL;
  }
}

nlpme_status make_initial_handle(const nlpme_grid* grid, nlpme::InitialDataSpec spec,
                                 const double* center, nlpme_field** out) {
  return guarded([&] {
    if (!grid || !out) throw std::invalid_argument("null argument");
    auto g = grid_of(grid);
    if (center)
      spec.center.assign(center, center + g->dim());
    *out = wrap(nlpme::make_initial(spec, g));
  });
}

} // namespace

extern "C" {

const char* nlpme_version(void) { return "1.0.0"; }

const char* nlpme_last_error(void) { return g_last_error.c_str(); }

nlpme_status nlpme_grid_create(int dim, double half_length, int points_per_axis,
                               nlpme_grid** out) {
  return guarded([&] {
    if (!out) throw std::invalid_argument("null output handle");
    auto grid = nlpme::Grid::make(dim, half_length, points_per_axis);
    *out = reinterpret_cast<nlpme_grid*>(new GridHandle{std::move(grid)});
  });
}

void nlpme_grid_destroy(nlpme_grid* grid) {
  delete reinterpret_cast<GridHandle*>(grid);
}

int nlpme_grid_dim(const nlpme_grid* grid) { return grid_of(grid)->dim(); }
int nlpme_grid_points_per_axis(const nlpme_grid* grid) {
  return grid_of(grid)->points_per_axis();
}
double nlpme_grid_half_length(const nlpme_grid* grid) { return grid_of(grid)->half_length(); }
double nlpme_grid_dx(const nlpme_grid* grid) { return grid_of(grid)->dx(); }
size_t nlpme_grid_node_count(const nlpme_grid* grid) { return grid_of(grid)->node_count(); }

nlpme_status nlpme_field_create(const nlpme_grid* grid, const double* values, size_t count,
                                nlpme_field** out) {
  return guarded([&] {
    if (!grid || !out) throw std::invalid_argument("null argument");
    auto g = grid_of(grid);
    if (!values) {
      *out = wrap(nlpme::Field(g));
      return;
    }
    if (count != g->node_count())
      throw std::invalid_argument("value count does not match the grid");
    *out = wrap(nlpme::Field(g, std::vector<double>(values, values + count)));
  });
}

void nlpme_field_destroy(nlpme_field* field) {
  delete reinterpret_cast<FieldHandle*>(field);
}

size_t nlpme_field_size(const nlpme_field* field) { return field_of(field).size(); }

nlpme_status nlpme_field_copy_values(const nlpme_field* field, double* out, size_t count) {
  return guarded([&] {
    if (!field || !out) throw std::invalid_argument("null argument");
    const auto& f = field_of(field);
    if (count != f.size()) throw std::invalid_argument("buffer size mismatch");
    std::memcpy(out, f.values().data(), count * sizeof(double));
  });
}

nlpme_status nlpme_field_init_gaussian(const nlpme_grid* grid, double mass, double sigma,
                                       const double* center, nlpme_field** out) {
  nlpme::InitialDataSpec spec;
  spec.kind = nlpme::InitialDataSpec::Kind::gaussian;
  spec.mass = mass;
  spec.width = sigma;
  return make_initial_handle(grid, std::move(spec), center, out);
}

nlpme_status nlpme_field_init_box(const nlpme_grid* grid, double mass, double half_width,
                                  const double* center, nlpme_field** out) {
  nlpme::InitialDataSpec spec;
  spec.kind = nlpme::InitialDataSpec::Kind::box;
  spec.mass = mass;
  spec.width = half_width;
  return make_initial_handle(grid, std::move(spec), center, out);
}

nlpme_status nlpme_field_init_mollified_dirac(const nlpme_grid* grid, double mass,
                                              double mollifier_width, const double* center,
                                              nlpme_field** out) {
  nlpme::InitialDataSpec spec;
  spec.kind = nlpme::InitialDataSpec::Kind::mollified_dirac;
  spec.mass = mass;
  spec.mollifier_width = mollifier_width;
  return make_initial_handle(grid, std::move(spec), center, out);
}

nlpme_status nlpme_field_write_snapshot(const nlpme_field* field, const char* path_base,
                                        double time, int with_csv) {
  return guarded([&] {
    if (!field || !path_base) throw std::invalid_argument("null argument");
    nlpme::write_snapshot(field_of(field), path_base, time, "", with_csv != 0);
  });
}

nlpme_status nlpme_field_read_snapshot(const char* path_base, nlpme_field** out,
                                       double* time_out) {
  return guarded([&] {
    if (!path_base || !out) throw std::invalid_argument("null argument");
    double t = 0.0;
    *out = wrap(nlpme::read_snapshot(path_base, &t));
    if (time_out) *time_out = t;
  });
}

nlpme_status nlpme_apply_operator(const nlpme_field* in, nlpme_operator op, double s,
                                  double epsilon, int axis, nlpme_field** out) {
  return guarded([&] {
    if (!in || !out) throw std::invalid_argument("null argument");
    const auto& f = field_of(in);
    switch (op) {
      case NLPME_OP_FRAC_LAPLACIAN:
        *out = wrap(nlpme::apply_frac_laplacian(f, s));
        return;
      case NLPME_OP_INVERSE_FRAC_LAPLACIAN:
        *out = wrap(nlpme::apply_inverse_frac_laplacian(f, s));
        return;
      case NLPME_OP_NONLOCAL_GRADIENT:
        *out = wrap(nlpme::apply_nonlocal_gradient(f, s, axis));
        return;
      case NLPME_OP_HALF_POSITIVE:
        *out = wrap(nlpme::apply_half_operator(f, nlpme::HalfOperator::positive_half, s));
        return;
      case NLPME_OP_HALF_NEGATIVE:
        *out = wrap(nlpme::apply_half_operator(f, nlpme::HalfOperator::negative_half, s));
        return;
      case NLPME_OP_HALF_ONE_MINUS_S:
        *out = wrap(nlpme::apply_half_operator(f, nlpme::HalfOperator::one_minus_s_half, s));
        return;
      case NLPME_OP_REGULARIZED:
      case NLPME_OP_REGULARIZED_SQRT: {
        nlpme::FracOperatorSpec spec;
        spec.s = s;
        spec.epsilon = epsilon;
        spec.mode = nlpme::OperatorMode::regularized_symbol;
        nlpme::RegularizedOperator reg(f.grid_ptr(), spec);
        *out = wrap(op == NLPME_OP_REGULARIZED ? reg.apply(f) : reg.apply_sqrt(f));
        return;
      }
    }
    throw std::invalid_argument("unknown operator");
  });
}

nlpme_status nlpme_heat_semigroup(const nlpme_field* in, double delta, double t,
                                  nlpme_field** out) {
  return guarded([&] {
    if (!in || !out) throw std::invalid_argument("null argument");
    *out = wrap(nlpme::apply_heat_semigroup(field_of(in), delta, t));
  });
}

nlpme_status nlpme_regularized_symbol(double xi_mag, double s, double epsilon, int dim,
                                      double* value) {
  return guarded([&] {
    if (!value) throw std::invalid_argument("null output");
    *value = nlpme::regularized_symbol_point(xi_mag, s, epsilon, dim, 0.0).value;
  });
}

nlpme_status nlpme_mass(const nlpme_field* field, double* out) {
  return guarded([&] {
    if (!field || !out) throw std::invalid_argument("null argument");
    *out = nlpme::mass(field_of(field));
  });
}

nlpme_status nlpme_lp_norm(const nlpme_field* field, double p, double* out) {
  return guarded([&] {
    if (!field || !out) throw std::invalid_argument("null argument");
    *out = nlpme::lp_norm(field_of(field), std::isfinite(p) ? p : nlpme::kInfinity);
  });
}

nlpme_status nlpme_support_radius(const nlpme_field* field, double threshold, double* out) {
  return guarded([&] {
    if (!field || !out) throw std::invalid_argument("null argument");
    *out = nlpme::support_radius(field_of(field), threshold);
  });
}

nlpme_status nlpme_tail_min(const nlpme_field* field, double r0, double* out) {
  return guarded([&] {
    if (!field || !out) throw std::invalid_argument("null argument");
    *out = nlpme::tail_min(field_of(field), r0);
  });
}

nlpme_status nlpme_stroock_varopoulos_slack(const nlpme_field* field, double q, double s,
                                            double epsilon, double* out) {
  return guarded([&] {
    if (!field || !out) throw std::invalid_argument("null argument");
    *out = nlpme::stroock_varopoulos_check(field_of(field), q, s, epsilon);
  });
}

nlpme_status nlpme_run_scenario(const char* config_path, const char* overrides,
                                int* exit_status) {
  return guarded([&] {
    if (!config_path || !exit_status) throw std::invalid_argument("null argument");
    try {
      *exit_status = nlpme::run_scenario(config_path, overrides ? overrides : "").exit_status;
    } catch (const nlpme::ConfigError& e) {
      g_last_error = e.what();
      *exit_status = 2;
    }
  });
}

nlpme_status nlpme_sweep(const char* spec_path, int jobs, int* exit_status) {
  return guarded([&] {
    if (!spec_path || !exit_status) throw std::invalid_argument("null argument");
    try {
      *exit_status = nlpme::sweep(spec_path, jobs).exit_status;
    } catch (const nlpme::ConfigError& e) {
      g_last_error = e.what();
      *exit_status = 2;
    }
  });
}

nlpme_status nlpme_check_ops(const char* report_path, int* exit_status) {
  return guarded([&] {
    if (!exit_status) throw std::invalid_argument("null argument");
    nlpme::CheckOpsReport report = nlpme::check_ops();
    const std::string path = report_path && *report_path
                                 ? report_path
                                 : nlpme::resolve_output_dir("checkops_report.json");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("check-ops: cannot open " + path);
    out << report.json();
    *exit_status = report.all_passed ? 0 : 1;
  });
}

nlpme_status nlpme_report(const char* artifact_dir, const char* out_base, int* exit_status) {
  return guarded([&] {
    if (!artifact_dir || !exit_status) throw std::invalid_argument("null argument");
    try {
      *exit_status = nlpme::emit_report(artifact_dir, out_base ? out_base : "");
    } catch (const nlpme::ConfigError& e) {
      g_last_error = e.what();
      *exit_status = 2;
    }
  });
}

} // extern "C"
