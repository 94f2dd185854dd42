#include "diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nlpme {

namespace {

std::string format_p(double p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", p);
  return buf;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

double mass(const Field& field) {
  double s = 0.0;
  for (double v : field.values()) s += v;
  return s * field.grid().cell_volume();
}

double lp_norm(const Field& field, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : field.values()) m = std::max(m, std::abs(v));
    return m;
  }
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p must be >= 1 or infinity");
  double s = 0.0;
  for (double v : field.values()) s += std::pow(std::abs(v), p);
  return std::pow(s * field.grid().cell_volume(), 1.0 / p);
}

double inner_product(const Field& a, const Field& b) {
  if (a.size() != b.size()) throw std::invalid_argument("inner_product: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * a.grid().cell_volume();
}

double support_radius(const Field& field, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("support_radius: threshold must be > 0");
  const Grid& g = field.grid();
  double radius = 0.0;
  double x[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] > threshold) {
      g.node_position(i, x);
      const double r = g.dim() == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
      radius = std::max(radius, r);
    }
  }
  return radius;
}

double tail_min(const Field& field, double r0) {
  const Grid& g = field.grid();
  if (r0 >= g.half_length())
    throw std::invalid_argument("tail_min: r0 must be smaller than the half length");
  double m = std::numeric_limits<double>::infinity();
  double x[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < field.size(); ++i) {
    g.node_position(i, x);
    const double r = g.dim() == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
    if (r >= r0) m = std::min(m, field[i]);
  }
  return m;
}

double second_energy(const Field& field, double s) {
  Field half = apply_half_operator(field, HalfOperator::negative_half, s);
  return 0.5 * inner_product(half, half);
}

double lp_dissipation_density(const Field& field, double p, double s, double m) {
  const double expo = 0.5 * (m + p - 1.0);
  Field powered(field.grid_ptr());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double v = std::max(field[i], 0.0);
    powered[i] = std::pow(v, expo);
  }
  Field half = apply_half_operator(powered, HalfOperator::one_minus_s_half, s);
  return inner_product(half, half);
}

double first_energy_dissipation_density(const Field& field, double s) {
  double total = 0.0;
  for (int axis = 0; axis < field.grid().dim(); ++axis) {
    Field g = apply_nonlocal_gradient(field, 0.5 * s, axis);
    total += inner_product(g, g);
  }
  return total;
}

FirstEnergyValue first_energy(const Field& field, double m, double floor) {
  double sum = 0.0;
  std::size_t covered = 0;
  const bool needs_floor = m >= 3.0;
  for (double v : field.values()) {
    const double u = std::max(v, 0.0);
    if (needs_floor && u <= floor) continue;
    const double d = first_energy_density(u, m);
    if (std::isfinite(d)) {
      sum += d;
      ++covered;
    }
  }
  return {sum * field.grid().cell_volume(),
          static_cast<double>(covered) / static_cast<double>(field.size())};
}

double stroock_varopoulos_check(const Field& field, double q, const RegularizedOperator& op) {
  if (!(q > 1.0)) throw std::invalid_argument("stroock_varopoulos: q must be > 1");
  Field psi_u(field.grid_ptr());
  Field u_half(field.grid_ptr());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double u = std::max(field[i], 0.0);
    psi_u[i] = std::pow(u, q - 1.0);
    u_half[i] = std::pow(u, 0.5 * q);
  }
  const double lhs = inner_product(psi_u, op.apply(field));
  Field root = op.apply_sqrt(u_half);
  const double rhs = 4.0 * (q - 1.0) / (q * q) * inner_product(root, root);
  return lhs - rhs;
}

double stroock_varopoulos_check(const Field& field, double q, double s, double epsilon) {
  FracOperatorSpec spec;
  spec.s = s;
  spec.epsilon = epsilon;
  spec.mode = epsilon > 0.0 ? OperatorMode::regularized_kernel : OperatorMode::exact_symbol;
  RegularizedOperator op(field.grid_ptr(), spec);
  return stroock_varopoulos_check(field, q, op);
}

RunLedger::RunLedger(LedgerConfig config) : config_(std::move(config)) {
  config_.nonlinearity.validate();
  if (config_.p_set.empty()) config_.p_set = {2.0};
  lp_acc_.assign(config_.p_set.size(), 0.0);
}

RunLedger::Rates RunLedger::rates(const Field& field) const {
  Rates out;
  std::vector<Field> v;
  if (config_.velocity) {
    v = config_.velocity(field);
  } else {
    for (int axis = 0; axis < field.grid().dim(); ++axis)
      v.push_back(apply_nonlocal_gradient(field, config_.s, axis));
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    double vsq = 0.0;
    for (const auto& va : v) vsq += va[i] * va[i];
    d2 += config_.nonlinearity.mobility(std::max(field[i], 0.0)) * vsq;
  }
  out.d2 = d2 * field.grid().cell_volume();
  out.d1 = first_energy_dissipation_density(field, config_.s);
  out.lp.reserve(config_.p_set.size());
  for (double p : config_.p_set) {
    const double m = config_.nonlinearity.m;
    const double coef = 4.0 * p * (p - 1.0) / ((m + p - 1.0) * (m + p - 1.0));
    out.lp.push_back(coef * lp_dissipation_density(field, p, config_.s, m));
  }
  return out;
}

void RunLedger::advance(double t_new, const Field& left_state) {
  if (!started_) {
    // an advance before any observation pins the cursor at its start
    cursor_ = t_new;
    started_ = true;
    return;
  }
  if (!(t_new > cursor_))
    throw std::invalid_argument("ledger: advance must move the cursor forward");
  const double dt = t_new - cursor_;
  const Rates r = rates(left_state);
  d2_acc_ += dt * r.d2;
  d1_acc_ += dt * r.d1;
  for (std::size_t j = 0; j < lp_acc_.size(); ++j) lp_acc_[j] += dt * r.lp[j];
  cursor_ = t_new;
}

void RunLedger::observe(double t, const Field& field) {
  if (!started_) {
    cursor_ = t;
    started_ = true;
  }
  if (!rows_.empty() && !(t > rows_.back().t))
    throw std::invalid_argument("ledger: observation times must increase strictly");
  if (std::abs(t - cursor_) > 1e-9 * std::max(1.0, std::abs(t)))
    throw std::invalid_argument("ledger: observation not at the accumulator cursor");
  if (rows_.empty() && threshold_ <= 0.0) {
    threshold_ = config_.support_threshold > 0.0 ? config_.support_threshold
                                                 : 1e-10 * lp_norm(field, kInfinity);
    if (threshold_ <= 0.0) threshold_ = 1e-300;
  }

  LedgerRow row;
  row.t = t;
  row.mass = mass(field);
  row.linf = lp_norm(field, kInfinity);
  row.lp.reserve(config_.p_set.size());
  for (double p : config_.p_set) row.lp.push_back(lp_norm(field, p));
  row.e2 = second_energy(field, config_.s);
  row.d2_acc = d2_acc_;
  row.lp_diss.assign(lp_acc_.begin(), lp_acc_.end());
  const auto fe = first_energy(field, config_.nonlinearity.m, config_.first_energy_floor);
  row.e1 = fe.value;
  row.e1_coverage = fe.coverage;
  row.d1_acc = d1_acc_;
  row.support_radius = support_radius(field, threshold_);
  row.tail_min = config_.tail_r0 > 0.0 ? tail_min(field, config_.tail_r0) : 0.0;
  rows_.push_back(std::move(row));
}

std::string RunLedger::csv_header() const {
  std::string h = "t,mass,linf";
  for (double p : config_.p_set) h += ",lp_" + format_p(p);
  h += ",e2,d2_acc";
  for (double p : config_.p_set) h += ",lp_diss_" + format_p(p);
  h += ",e1,support_radius,tail_min";
  return h;
}

void RunLedger::write_csv(std::ostream& out) const {
  out << csv_header() << "\n";
  for (const auto& r : rows_) {
    out << format_value(r.t) << "," << format_value(r.mass) << "," << format_value(r.linf);
    for (double v : r.lp) out << "," << format_value(v);
    out << "," << format_value(r.e2) << "," << format_value(r.d2_acc);
    for (double v : r.lp_diss) out << "," << format_value(v);
    out << "," << format_value(r.e1) << "," << format_value(r.support_radius) << ","
        << format_value(r.tail_min) << "\n";
  }
}

CheckResult lp_energy_ledger(std::span<const Sample> trajectory, double p, double s, double m,
                             double tol) {
  if (trajectory.empty()) throw std::invalid_argument("lp_energy_ledger: empty trajectory");
  CheckResult out;
  out.name = "lp_energy_p" + format_p(p);
  out.tol = tol;
  const double coef = 4.0 * p * (p - 1.0) / ((m + p - 1.0) * (m + p - 1.0));
  const double rhs = std::pow(lp_norm(trajectory.front().field, p), p);
  double acc = 0.0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    if (k > 0) {
      const double dt = trajectory[k].t - trajectory[k - 1].t;
      acc += dt * coef * lp_dissipation_density(trajectory[k - 1].field, p, s, m);
    }
    const double lhs = std::pow(lp_norm(trajectory[k].field, p), p) + acc;
    worst = std::min(worst, rhs - lhs);
  }
  out.slack = worst;
  out.pass = worst >= -tol * rhs;
  return out;
}

CheckResult second_energy_ledger(std::span<const Sample> trajectory, double s,
                                 const NonlinearitySpec& nonlinearity,
                                 const std::function<std::vector<Field>(const Field&)>& velocity,
                                 double tol) {
  if (trajectory.empty()) throw std::invalid_argument("second_energy_ledger: empty trajectory");
  CheckResult out;
  out.name = "second_energy";
  out.tol = tol;
  const double e0 = second_energy(trajectory.front().field, s);
  double acc = 0.0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const Field& u = trajectory[k].field;
    if (k > 0) {
      const Field& prev = trajectory[k - 1].field;
      std::vector<Field> v;
      if (velocity) {
        v = velocity(prev);
      } else {
        for (int axis = 0; axis < prev.grid().dim(); ++axis)
          v.push_back(apply_nonlocal_gradient(prev, s, axis));
      }
      double rate = 0.0;
      for (std::size_t i = 0; i < prev.size(); ++i) {
        double vsq = 0.0;
        for (const auto& va : v) vsq += va[i] * va[i];
        rate += nonlinearity.mobility(std::max(prev[i], 0.0)) * vsq;
      }
      acc += (trajectory[k].t - trajectory[k - 1].t) * rate * prev.grid().cell_volume();
    }
    worst = std::min(worst, e0 - (second_energy(u, s) + acc));
  }
  out.slack = worst;
  out.pass = worst >= -tol * std::max(e0, 1e-300);
  return out;
}

CheckResult first_energy_ledger(std::span<const Sample> trajectory, double m, double s,
                                double tol, double floor) {
  if (trajectory.empty()) throw std::invalid_argument("first_energy_ledger: empty trajectory");
  CheckResult out;
  out.name = "first_energy";
  out.tol = tol;
  out.asserted = m > 1.0 && m < 2.0;
  const double weight = std::abs((2.0 - m) * (3.0 - m));
  const double rhs = first_energy(trajectory.front().field, m, floor).value;
  double acc = 0.0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    if (k > 0) {
      const double dt = trajectory[k].t - trajectory[k - 1].t;
      acc += dt * weight * first_energy_dissipation_density(trajectory[k - 1].field, s);
    }
    const double lhs = first_energy(trajectory[k].field, m, floor).value + acc;
    worst = std::min(worst, rhs - lhs);
  }
  out.slack = worst;
  out.pass = !out.asserted || worst >= -tol * std::max(std::abs(rhs), 1e-300);
  return out;
}

double gamma_theory(int dim, double m, double s, double p) {
  return dim / ((m - 1.0) * dim + 2.0 * p * (1.0 - s));
}

double delta_theory(int dim, double m, double s, double p) {
  return 2.0 * p * (1.0 - s) / ((m - 1.0) * dim + 2.0 * p * (1.0 - s));
}

SmoothingFit smoothing_fit(std::span<const std::pair<double, double>> t_linf, int dim, double m,
                           double s, double p) {
  if (t_linf.empty()) throw std::runtime_error("smoothing_fit: empty ledger");
  const double linf0 = t_linf.front().second;
  std::vector<std::pair<double, double>> window;
  for (const auto& [t, linf] : t_linf)
    if (t > 0.0 && linf > 0.0 && linf <= linf0 / 3.0) window.emplace_back(t, linf);
  if (window.size() < 8)
    throw std::runtime_error("smoothing_fit: fewer than 8 rows in the self-similar regime");
  if (!(window.back().first >= 10.0 * window.front().first))
    throw std::runtime_error("smoothing_fit: window does not span a decade in t");

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [t, linf] : window) {
    const double x = std::log(t), y = std::log(linf);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(window.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;

  SmoothingFit fit;
  fit.gamma_hat = -slope;
  fit.gamma_theory = gamma_theory(dim, m, s, p);
  fit.delta_theory = delta_theory(dim, m, s, p);
  fit.window_t_min = window.front().first;
  fit.window_t_max = window.back().first;
  fit.points = window.size();
  double ss = 0.0;
  for (const auto& [t, linf] : window) {
    const double r = std::log(linf) - (intercept + slope * std::log(t));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

double delta_fit(std::span<const std::pair<double, double>> lp0_linf) {
  if (lp0_linf.size() < 3)
    throw std::runtime_error("delta_fit: need at least 3 masses");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [lp0, linf] : lp0_linf) {
    const double x = std::log(lp0), y = std::log(linf);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(lp0_linf.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace nlpme
