#include "fracops.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_sum.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace nlpme {

namespace {

constexpr double kSymbolRelTol = 1e-9;

struct GslQuietGuard {
  GslQuietGuard() { gsl_set_error_handler_off(); }
};
const GslQuietGuard gsl_quiet_guard;

struct RadialKernel {
  double q;       // |xi|
  double eps2;    // epsilon^2
  double expo;    // (N + 2s) / 2
  int dim;
};

double envelope(double r, const RadialKernel& k) {
  const double base = std::pow(r * r + k.eps2, -k.expo);
  return k.dim == 2 ? r * base : base;
}

double oscillation(double t, int dim) {
  return dim == 2 ? gsl_sf_bessel_J0(t) : std::cos(t);
}

double head_integrand(double r, void* p) {
  const auto& k = *static_cast<const RadialKernel*>(p);
  return (1.0 - oscillation(r * k.q, k.dim)) * envelope(r, k);
}

double envelope_integrand(double r, void* p) {
  return envelope(r, *static_cast<const RadialKernel*>(p));
}

double oscillatory_integrand(double r, void* p) {
  const auto& k = *static_cast<const RadialKernel*>(p);
  return oscillation(r * k.q, k.dim) * envelope(r, k);
}

struct Workspaces {
  gsl_integration_workspace* main = nullptr;
  gsl_integration_workspace* cycle = nullptr;
  static constexpr std::size_t limit = 2000;
  Workspaces() {
    main = gsl_integration_workspace_alloc(limit);
    cycle = gsl_integration_workspace_alloc(limit);
    if (!main || !cycle) throw std::bad_alloc();
  }
  ~Workspaces() {
    if (main) gsl_integration_workspace_free(main);
    if (cycle) gsl_integration_workspace_free(cycle);
  }
};

struct PieceResult {
  double value = 0.0;
  double abs_error = 0.0;
};

PieceResult qag_panel(gsl_function* f, double a, double b, double epsabs,
                      gsl_integration_workspace* ws) {
  PieceResult out;
  const int status =
      gsl_integration_qag(f, a, b, epsabs, 0.1 * kSymbolRelTol, Workspaces::limit,
                          GSL_INTEG_GAUSS31, ws, &out.value, &out.abs_error);
  if (status != GSL_SUCCESS && status != GSL_EROUND)
    throw QuadratureError("symbol quadrature: panel did not converge");
  return out;
}

PieceResult qagiu_tail(gsl_function* f, double a, double epsabs,
                       gsl_integration_workspace* ws) {
  PieceResult out;
  const int status = gsl_integration_qagiu(f, a, epsabs, 0.1 * kSymbolRelTol,
                                           Workspaces::limit, ws, &out.value, &out.abs_error);
  if (status != GSL_SUCCESS && status != GSL_EROUND)
    throw QuadratureError("symbol quadrature: tail did not converge");
  return out;
}

// \int_a^infty cos(q r) envelope(r) dr via QUADPACK's Fourier integral.
PieceResult cosine_tail(RadialKernel& kernel, double a, double epsabs, Workspaces& ws) {
  gsl_function f{&envelope_integrand, &kernel};
  gsl_integration_qawo_table* table =
      gsl_integration_qawo_table_alloc(kernel.q, 1.0, GSL_INTEG_COSINE, 24);
  if (!table) throw std::bad_alloc();
  PieceResult out;
  const int status = gsl_integration_qawf(&f, a, epsabs, Workspaces::limit, ws.main,
                                          ws.cycle, table, &out.value, &out.abs_error);
  gsl_integration_qawo_table_free(table);
  if (status != GSL_SUCCESS && status != GSL_EROUND && status != GSL_ETOL)
    throw QuadratureError("symbol quadrature: oscillatory tail did not converge");
  return out;
}

// \int_a^infty J0(q r) envelope(r) dr: fixed-order panels between consecutive
// Bessel zeros, alternating series accelerated with the Levin u-transform.
PieceResult bessel_tail(RadialKernel& kernel, double a, double epsabs) {
  constexpr std::size_t kMaxTerms = 256;
  gsl_integration_glfixed_table* gl = gsl_integration_glfixed_table_alloc(25);
  gsl_sum_levin_u_workspace* levin = gsl_sum_levin_u_alloc(kMaxTerms);
  if (!gl || !levin) throw std::bad_alloc();

  gsl_function f{&oscillatory_integrand, &kernel};
  std::vector<double> terms;
  terms.reserve(kMaxTerms);

  // First zero of J0(q r) beyond a.
  unsigned zero_index = 1;
  double z = gsl_sf_bessel_zero_J0(zero_index) / kernel.q;
  while (z <= a) z = gsl_sf_bessel_zero_J0(++zero_index) / kernel.q;

  PieceResult out;
  double lead = gsl_integration_glfixed(&f, a, z, gl);
  double prev = z;

  double sum = 0.0, err = GSL_POSINF;
  for (std::size_t m = 0; m < kMaxTerms; ++m) {
    const double next = gsl_sf_bessel_zero_J0(++zero_index) / kernel.q;
    terms.push_back(gsl_integration_glfixed(&f, prev, next, gl));
    prev = next;
    if (terms.size() >= 6 && terms.size() % 4 == 0) {
      gsl_sum_levin_u_accel(terms.data(), terms.size(), levin, &sum, &err);
      if (err < 0.5 * epsabs) break;
    }
  }
  if (!(err < epsabs) && !terms.empty())
    gsl_sum_levin_u_accel(terms.data(), terms.size(), levin, &sum, &err);

  gsl_sum_levin_u_free(levin);
  gsl_integration_glfixed_table_free(gl);

  if (!std::isfinite(sum) || !(err < 10.0 * epsabs))
    throw QuadratureError("symbol quadrature: Bessel tail acceleration did not converge");
  out.value = lead + sum;
  out.abs_error = err;
  return out;
}

Field apply_mode_multiplier(const Field& field,
                            const std::function<std::complex<double>(const double*, std::size_t)>& m) {
  const Grid& g = field.grid();
  std::vector<std::complex<double>> mult(g.node_count());
  g.for_each_mode([&](std::size_t flat, const double* xi) { mult[flat] = m(xi, flat); });
  return Field(field.grid_ptr(), g.apply_multiplier(field.values(), mult));
}

double magnitude(const double* xi, int dim) {
  return dim == 1 ? std::abs(xi[0]) : std::hypot(xi[0], xi[1]);
}

void require_order(double s, const char* what) {
  if (!(s > 0.0) || !(s < 1.0))
    throw std::invalid_argument(std::string(what) + ": order s must lie in (0,1)");
}

} // namespace

void FracOperatorSpec::validate(int dim) const {
  require_order(s, "operator spec");
  if (epsilon < 0.0) throw std::invalid_argument("operator spec: epsilon must be >= 0");
  if (mode != OperatorMode::exact_symbol && !(epsilon > 0.0))
    throw std::invalid_argument("operator spec: regularized modes require epsilon > 0");
  if (c_norm > 0.0 && !std::isfinite(c_norm))
    throw std::invalid_argument("operator spec: c_norm must be finite");
  (void)dim;
}

double fraclap_normalization(int dim, double s) {
  require_order(s, "normalization");
  const double abs_gamma_minus_s = std::tgamma(1.0 - s) / s;
  return std::pow(4.0, s) * std::tgamma(0.5 * dim + s) /
         (std::pow(std::numbers::pi, 0.5 * dim) * abs_gamma_minus_s);
}

SymbolQuadratureResult regularized_symbol_point(double xi_mag, double s, double epsilon,
                                                int dim, double c_norm) {
  require_order(s, "regularized symbol");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("regularized symbol: epsilon must be > 0");
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("regularized symbol: dim must be 1 or 2");
  if (xi_mag == 0.0) return {0.0, 0.0};
  if (c_norm <= 0.0) c_norm = fraclap_normalization(dim, s);

  const double q = std::abs(xi_mag);
  RadialKernel kernel{q, epsilon * epsilon, 0.5 * (dim + 2.0 * s), dim};
  const double angular = dim == 2 ? 2.0 * std::numbers::pi : 2.0;
  const double scale = c_norm * angular;

  // Magnitude estimate for absolute tolerances: S rises like |xi|^{2s} and
  // saturates at c * ||J||_1-level for |xi| >> 1/eps.
  const double saturation = std::pow(std::numbers::pi, 0.5 * dim) * std::tgamma(s) *
                            std::pow(epsilon, -2.0 * s) / std::tgamma(0.5 * dim + s);
  const double s_ref = std::min(std::pow(q, 2.0 * s), c_norm * saturation);
  const double piece_epsabs = 0.2 * kSymbolRelTol * s_ref / scale;

  Workspaces ws;
  gsl_function head{&head_integrand, &kernel};
  gsl_function env{&envelope_integrand, &kernel};

  const double b_lo = std::min(epsilon, std::numbers::pi / q);
  const double b_hi = std::max(epsilon, std::numbers::pi / q);

  const PieceResult inner = qag_panel(&head, 0.0, b_lo, piece_epsabs, ws.main);
  const PieceResult outer = qag_panel(&head, b_lo, b_hi, piece_epsabs, ws.main);
  const PieceResult plateau = qagiu_tail(&env, b_hi, piece_epsabs, ws.main);
  const PieceResult osc = dim == 1 ? cosine_tail(kernel, b_hi, piece_epsabs, ws)
                                   : bessel_tail(kernel, b_hi, piece_epsabs);

  SymbolQuadratureResult out;
  out.value = scale * (inner.value + outer.value + plateau.value - osc.value);
  out.abs_error =
      scale * (inner.abs_error + outer.abs_error + plateau.abs_error + osc.abs_error);

  const double allowed = std::max(kSymbolRelTol * std::abs(out.value), 20.0 * kSymbolRelTol * s_ref);
  if (!std::isfinite(out.value) || out.abs_error > allowed)
    throw QuadratureError("regularized symbol: quadrature error above tolerance");
  return out;
}

SymbolTable regularized_symbol(const Grid& grid, double s, double epsilon, double c_norm) {
  if (c_norm <= 0.0) c_norm = fraclap_normalization(grid.dim(), s);
  SymbolTable table;
  table.grid = grid.shared_from_this();
  table.values.assign(grid.node_count(), 0.0);

  // The symbol is radial; quadrature is shared between modes with the same
  // integer |k|^2.
  const double unit = std::numbers::pi / grid.half_length();
  std::map<long long, double> cache;
  const int n = grid.points_per_axis();
  auto value_for = [&](long long k2) {
    auto it = cache.find(k2);
    if (it != cache.end()) return it->second;
    const double q = unit * std::sqrt(static_cast<double>(k2));
    const double v =
        regularized_symbol_point(q, s, epsilon, grid.dim(), c_norm).value;
    cache.emplace(k2, v);
    return v;
  };

  if (grid.dim() == 1) {
    for (int a = 0; a < n; ++a) {
      const long long k = grid.wavenumber(a);
      table.values[static_cast<std::size_t>(a)] = value_for(k * k);
    }
  } else {
    std::size_t flat = 0;
    for (int a0 = 0; a0 < n; ++a0) {
      const long long k0 = grid.wavenumber(a0);
      for (int a1 = 0; a1 < n; ++a1, ++flat) {
        const long long k1 = grid.wavenumber(a1);
        table.values[flat] = value_for(k0 * k0 + k1 * k1);
      }
    }
  }
  return table;
}

Field apply_frac_laplacian(const Field& field, double s) {
  if (!(s > 0.0) || s > 1.0)
    throw std::invalid_argument("frac laplacian: s must lie in (0,1]");
  const int dim = field.grid().dim();
  return apply_mode_multiplier(field, [&](const double* xi, std::size_t) {
    const double q = magnitude(xi, dim);
    return std::complex<double>(q == 0.0 ? 0.0 : std::pow(q, 2.0 * s), 0.0);
  });
}

Field apply_inverse_frac_laplacian(const Field& field, double s) {
  require_order(s, "inverse frac laplacian");
  const int dim = field.grid().dim();
  if (dim == 1 && s >= 0.5)
    throw std::invalid_argument(
        "inverse frac laplacian: ill defined for dim 1 and s >= 1/2; use the nonlocal gradient");
  return apply_mode_multiplier(field, [&](const double* xi, std::size_t) {
    const double q = magnitude(xi, dim);
    return std::complex<double>(q == 0.0 ? 0.0 : std::pow(q, -2.0 * s), 0.0);
  });
}

Field apply_nonlocal_gradient(const Field& field, double s, int axis) {
  require_order(s, "nonlocal gradient");
  const Grid& g = field.grid();
  if (axis < 0 || axis >= g.dim())
    throw std::invalid_argument("nonlocal gradient: invalid axis");
  return apply_mode_multiplier(field, [&](const double* xi, std::size_t flat) {
    const double q = magnitude(xi, g.dim());
    if (q == 0.0 || g.mode_on_nyquist(flat, axis)) return std::complex<double>(0.0, 0.0);
    return std::complex<double>(0.0, xi[axis] * std::pow(q, -2.0 * s));
  });
}

Field apply_half_operator(const Field& field, HalfOperator kind, double s) {
  require_order(s, "half operator");
  const int dim = field.grid().dim();
  const double power = kind == HalfOperator::positive_half ? s
                       : kind == HalfOperator::negative_half ? -s
                                                             : 1.0 - s;
  return apply_mode_multiplier(field, [&](const double* xi, std::size_t) {
    const double q = magnitude(xi, dim);
    return std::complex<double>(q == 0.0 ? 0.0 : std::pow(q, power), 0.0);
  });
}

Field apply_heat_semigroup(const Field& field, double delta, double t) {
  if (delta < 0.0) throw std::invalid_argument("heat semigroup: delta must be >= 0");
  if (t < 0.0) throw std::invalid_argument("heat semigroup: t must be >= 0");
  const int dim = field.grid().dim();
  if (delta == 0.0 || t == 0.0) return field;
  return apply_mode_multiplier(field, [&](const double* xi, std::size_t) {
    const double q = magnitude(xi, dim);
    return std::complex<double>(std::exp(-delta * t * q * q), 0.0);
  });
}

RegularizedOperator::RegularizedOperator(GridPtr grid, FracOperatorSpec spec)
    : grid_(std::move(grid)), spec_(spec) {
  spec_.validate(grid_->dim());
  if (spec_.c_norm <= 0.0) spec_.c_norm = fraclap_normalization(grid_->dim(), spec_.s);

  symbol_.grid = grid_;
  symbol_.values.assign(grid_->node_count(), 0.0);

  switch (spec_.mode) {
    case OperatorMode::exact_symbol: {
      grid_->for_each_mode([&](std::size_t flat, const double* xi) {
        const double q = magnitude(xi, grid_->dim());
        symbol_.values[flat] = q == 0.0 ? 0.0 : std::pow(q, 2.0 * spec_.s);
      });
      break;
    }
    case OperatorMode::regularized_symbol: {
      symbol_ = regularized_symbol(*grid_, spec_.s, spec_.epsilon, spec_.c_norm);
      break;
    }
    case OperatorMode::regularized_kernel: {
      // Tabulate the periodized kernel over displacement offsets d*dx and
      // read its circulant symbol off the grid transform. The symbol of a
      // positive symmetric kernel is nonnegative up to rounding.
      const Grid& g = *grid_;
      const double L2 = 2.0 * g.half_length();
      const double expo = 0.5 * (g.dim() + 2.0 * spec_.s);
      const double eps2 = spec_.epsilon * spec_.epsilon;
      auto kernel_at = [&](double z0, double z1) {
        double sum = 0.0;
        for (int k0 = -1; k0 <= 1; ++k0) {
          const double a = z0 + L2 * k0;
          if (g.dim() == 1) {
            sum += std::pow(a * a + eps2, -expo);
          } else {
            for (int k1 = -1; k1 <= 1; ++k1) {
              const double b = z1 + L2 * k1;
              sum += std::pow(a * a + b * b + eps2, -expo);
            }
          }
        }
        return spec_.c_norm * sum;
      };

      std::vector<double> tab(g.node_count());
      const int n = g.points_per_axis();
      if (g.dim() == 1) {
        for (int d = 0; d < n; ++d) tab[static_cast<std::size_t>(d)] = kernel_at(d * g.dx(), 0.0);
      } else {
        std::size_t flat = 0;
        for (int d0 = 0; d0 < n; ++d0)
          for (int d1 = 0; d1 < n; ++d1, ++flat) tab[flat] = kernel_at(d0 * g.dx(), d1 * g.dx());
      }

      const auto spectrum = g.transform(tab);
      // transform() = dx^N (-1)^{k phases} RawDFT, so the circulant symbol
      // dx^N (RawDFT[0] - RawDFT[k]) needs the phases unwound.
      const double total = spectrum[0].real();
      if (g.dim() == 1) {
        for (int a = 0; a < n; ++a) {
          const double phase = (g.wavenumber(a) % 2 == 0) ? 1.0 : -1.0;
          const double v = total - phase * spectrum[static_cast<std::size_t>(a)].real();
          symbol_.values[static_cast<std::size_t>(a)] = std::max(v, 0.0);
        }
      } else {
        std::size_t flat = 0;
        for (int a0 = 0; a0 < n; ++a0) {
          const double p0 = (g.wavenumber(a0) % 2 == 0) ? 1.0 : -1.0;
          for (int a1 = 0; a1 < n; ++a1, ++flat) {
            const double p1 = (g.wavenumber(a1) % 2 == 0) ? 1.0 : -1.0;
            symbol_.values[flat] = std::max(total - p0 * p1 * spectrum[flat].real(), 0.0);
          }
        }
      }
      symbol_.values[0] = 0.0;
      break;
    }
  }

  multiplier_.resize(symbol_.values.size());
  sqrt_multiplier_.resize(symbol_.values.size());
  for (std::size_t i = 0; i < symbol_.values.size(); ++i) {
    multiplier_[i] = std::complex<double>(symbol_.values[i], 0.0);
    sqrt_multiplier_[i] = std::complex<double>(std::sqrt(symbol_.values[i]), 0.0);
  }
}

Field RegularizedOperator::apply(const Field& field) const {
  if (field.grid_ptr().get() != grid_.get())
    throw std::invalid_argument("regularized operator: field grid mismatch");
  return Field(grid_, grid_->apply_multiplier(field.values(), multiplier_));
}

Field RegularizedOperator::apply_sqrt(const Field& field) const {
  if (field.grid_ptr().get() != grid_.get())
    throw std::invalid_argument("regularized operator: field grid mismatch");
  return Field(grid_, grid_->apply_multiplier(field.values(), sqrt_multiplier_));
}

double RegularizedOperator::kernel_l1() const {
  if (!(spec_.epsilon > 0.0))
    throw std::invalid_argument("kernel_l1: defined for epsilon > 0 only");
  const int dim = grid_->dim();
  return spec_.c_norm * std::pow(std::numbers::pi, 0.5 * dim) * std::tgamma(spec_.s) *
         std::pow(spec_.epsilon, -2.0 * spec_.s) / std::tgamma(0.5 * dim + spec_.s);
}

double RegularizedOperator::image_tail_bound() const {
  const int dim = grid_->dim();
  const double angular = dim == 2 ? 2.0 * std::numbers::pi : 2.0;
  const double r0 = 2.0 * grid_->half_length();
  return spec_.c_norm * angular * std::pow(r0, -2.0 * spec_.s) / (2.0 * spec_.s);
}

} // namespace nlpme
