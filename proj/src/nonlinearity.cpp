#include "nonlinearity.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <limits>

#include "fracops.hpp" // QuadratureError

namespace nlpme {

namespace {

struct PsiParams {
  double p;
  double m;
  double mu;
  bool half; // integrand of Psi instead of psi
};

double psi_integrand(double zeta, void* p) {
  const auto& prm = *static_cast<const PsiParams*>(p);
  if (zeta <= 0.0) return 0.0;
  if (prm.half)
    return std::pow(zeta, 0.5 * (prm.p - 2.0)) * std::pow(zeta + prm.mu, 0.5 * (prm.m - 1.0));
  return std::pow(zeta, prm.p - 2.0) * std::pow(zeta + prm.mu, prm.m - 1.0);
}

double quad_zero_to(double z, PsiParams prm) {
  gsl_integration_workspace* ws = gsl_integration_workspace_alloc(400);
  if (!ws) throw std::bad_alloc();
  gsl_function f{&psi_integrand, &prm};
  double value = 0.0, abserr = 0.0;
  // qags handles the zeta^{p-2} endpoint singularity for p < 2
  const int status = gsl_integration_qags(&f, 0.0, z, 0.0, 1e-10, 400, ws, &value, &abserr);
  gsl_integration_workspace_free(ws);
  if (status != GSL_SUCCESS && status != GSL_EROUND)
    throw QuadratureError("psi_pair: quadrature did not converge");
  return value;
}

} // namespace

void NonlinearitySpec::validate() const {
  if (!(m >= 1.0)) throw std::invalid_argument("nonlinearity: m must be >= 1");
  if (mu < 0.0) throw std::invalid_argument("nonlinearity: mu must be >= 0");
  if (kind == MobilityKind::power && mu != 0.0)
    throw std::invalid_argument("nonlinearity: power mobility requires mu = 0");
}

double NonlinearitySpec::mobility(double u) const {
  if (u < 0.0) throw std::invalid_argument("mobility: negative u");
  switch (kind) {
    case MobilityKind::power:
      if (m == 1.0) return 1.0;
      return std::pow(u, m - 1.0);
    case MobilityKind::shifted_power:
      return std::pow(u + mu, m - 1.0);
    case MobilityKind::log_mobility:
      return 1.0 / (1.0 + u);
  }
  return 0.0;
}

double NonlinearitySpec::mobility_bound(double u_max) const {
  if (u_max < 0.0) u_max = 0.0;
  if (kind == MobilityKind::log_mobility) return 1.0;
  return mobility(u_max);
}

PsiPair psi_pair(double z, double p, double m, double mu) {
  if (z < 0.0) throw std::invalid_argument("psi_pair: z must be >= 0");
  if (!(p > 1.0)) throw std::invalid_argument("psi_pair: p must be > 1");
  if (mu < 0.0) throw std::invalid_argument("psi_pair: mu must be >= 0");
  if (z == 0.0) return {0.0, 0.0};
  if (mu == 0.0) {
    const double a = m + p - 2.0;
    const double b = 0.5 * (m + p - 1.0);
    return {std::pow(z, a) / a, std::pow(z, b) / b};
  }
  PsiPair out;
  out.psi = quad_zero_to(z, {p, m, mu, false});
  out.big_psi = quad_zero_to(z, {p, m, mu, true});
  return out;
}

double first_energy_density(double u, double m) {
  if (u < 0.0) throw std::invalid_argument("first_energy_density: negative u");
  if (m == 2.0) return u == 0.0 ? 0.0 : u * std::log(u);
  if (m == 3.0)
    return u == 0.0 ? std::numeric_limits<double>::infinity() : u - std::log(u);
  if (u == 0.0) {
    if (m < 3.0) return 0.0;
    return std::numeric_limits<double>::infinity();
  }
  return std::pow(u, 3.0 - m);
}

EnergyFunctions::EnergyFunctions(double p, double m, double mu) : p_(p), m_(m), mu_(mu) {
  if (!(p > 1.0)) throw std::invalid_argument("energy functions: p must be > 1");
  if (!(m >= 1.0)) throw std::invalid_argument("energy functions: m must be >= 1");
  if (mu < 0.0) throw std::invalid_argument("energy functions: mu must be >= 0");
}

} // namespace nlpme
