#include "grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>

#include <json.hpp>

namespace nlpme {

namespace {

// FFTW planning is not thread safe; plan under a process-wide lock.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  fftw_complex* data = nullptr;
  explicit FftwBuffer(std::size_t count)
      : data(fftw_alloc_complex(count)) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
};

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

} // namespace

struct Grid::FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ~FftPlans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

Grid::Grid(int dim, double half_length, int n)
    : dim_(dim),
      half_length_(half_length),
      n_(n),
      dx_(2.0 * half_length / n),
      node_count_(dim == 2 ? static_cast<std::size_t>(n) * n : static_cast<std::size_t>(n)),
      cell_volume_(dim == 2 ? dx_ * dx_ : dx_),
      box_volume_(dim == 2 ? 4.0 * half_length * half_length : 2.0 * half_length) {
  freq_.resize(static_cast<std::size_t>(n_));
  for (int a = 0; a < n_; ++a)
    freq_[static_cast<std::size_t>(a)] = std::numbers::pi * wavenumber(a) / half_length_;

  plans_ = std::make_unique<FftPlans>();
  FftwBuffer in(node_count_), out(node_count_);
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (dim_ == 1) {
    plans_->forward = fftw_plan_dft_1d(n_, in.data, out.data, FFTW_FORWARD, FFTW_ESTIMATE);
    plans_->backward = fftw_plan_dft_1d(n_, in.data, out.data, FFTW_BACKWARD, FFTW_ESTIMATE);
  } else {
    plans_->forward = fftw_plan_dft_2d(n_, n_, in.data, out.data, FFTW_FORWARD, FFTW_ESTIMATE);
    plans_->backward = fftw_plan_dft_2d(n_, n_, in.data, out.data, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  if (!plans_->forward || !plans_->backward)
    throw std::runtime_error("grid: FFT plan creation failed");
}

Grid::~Grid() = default;

GridPtr Grid::make(int dim, double half_length, int points_per_axis) {
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("grid: dim must be 1 or 2");
  if (!(half_length > 0.0))
    throw std::invalid_argument("grid: half_length must be positive");
  if (points_per_axis < 8 || !is_power_of_two(points_per_axis))
    throw std::invalid_argument("grid: points per axis must be a power of two >= 8");
  return GridPtr(new Grid(dim, half_length, points_per_axis));
}

void Grid::node_position(std::size_t flat, double* x_out) const {
  if (dim_ == 1) {
    x_out[0] = coordinate(static_cast<int>(flat));
  } else {
    x_out[0] = coordinate(static_cast<int>(flat / static_cast<std::size_t>(n_)));
    x_out[1] = coordinate(static_cast<int>(flat % static_cast<std::size_t>(n_)));
  }
}

void Grid::mode_frequency(std::size_t flat, double* xi_out) const {
  if (dim_ == 1) {
    xi_out[0] = freq_[flat];
  } else {
    xi_out[0] = freq_[flat / static_cast<std::size_t>(n_)];
    xi_out[1] = freq_[flat % static_cast<std::size_t>(n_)];
  }
}

double Grid::mode_magnitude(std::size_t flat) const {
  double xi[2] = {0.0, 0.0};
  mode_frequency(flat, xi);
  return dim_ == 1 ? std::abs(xi[0]) : std::hypot(xi[0], xi[1]);
}

bool Grid::mode_on_nyquist(std::size_t flat, int axis) const {
  if (dim_ == 1) return is_nyquist(static_cast<int>(flat));
  const int i0 = static_cast<int>(flat / static_cast<std::size_t>(n_));
  const int i1 = static_cast<int>(flat % static_cast<std::size_t>(n_));
  return is_nyquist(axis == 0 ? i0 : i1);
}

void Grid::for_each_mode(const std::function<void(std::size_t, const double*)>& fn) const {
  double xi[2] = {0.0, 0.0};
  if (dim_ == 1) {
    for (std::size_t a = 0; a < node_count_; ++a) {
      xi[0] = freq_[a];
      fn(a, xi);
    }
  } else {
    std::size_t flat = 0;
    for (int i0 = 0; i0 < n_; ++i0) {
      xi[0] = freq_[static_cast<std::size_t>(i0)];
      for (int i1 = 0; i1 < n_; ++i1, ++flat) {
        xi[1] = freq_[static_cast<std::size_t>(i1)];
        fn(flat, xi);
      }
    }
  }
}

std::vector<std::complex<double>> Grid::transform(std::span<const double> values) const {
  if (values.size() != node_count_)
    throw std::invalid_argument("grid: transform size mismatch");
  FftwBuffer in(node_count_), out(node_count_);
  for (std::size_t i = 0; i < node_count_; ++i) {
    in.data[i][0] = values[i];
    in.data[i][1] = 0.0;
  }
  fftw_execute_dft(plans_->forward, in.data, out.data);

  // Raw DFT gives sum_j u_j e^{-2 pi i k j / n}; the convention adds the
  // coordinate-origin phase e^{-i xi_k (-L)} = (-1)^k per axis and dx^dim.
  std::vector<std::complex<double>> spectrum(node_count_);
  if (dim_ == 1) {
    for (int a = 0; a < n_; ++a) {
      const double phase = (wavenumber(a) % 2 == 0) ? 1.0 : -1.0;
      spectrum[static_cast<std::size_t>(a)] =
          std::complex<double>(out.data[a][0], out.data[a][1]) * (phase * cell_volume_);
    }
  } else {
    std::size_t flat = 0;
    for (int i0 = 0; i0 < n_; ++i0) {
      const double p0 = (wavenumber(i0) % 2 == 0) ? 1.0 : -1.0;
      for (int i1 = 0; i1 < n_; ++i1, ++flat) {
        const double p1 = (wavenumber(i1) % 2 == 0) ? 1.0 : -1.0;
        spectrum[flat] =
            std::complex<double>(out.data[flat][0], out.data[flat][1]) * (p0 * p1 * cell_volume_);
      }
    }
  }
  return spectrum;
}

std::vector<double> Grid::inverse_transform(std::span<const std::complex<double>> spectrum) const {
  if (spectrum.size() != node_count_)
    throw std::invalid_argument("grid: inverse_transform size mismatch");
  FftwBuffer in(node_count_), out(node_count_);
  const double scale = 1.0 / (cell_volume_ * static_cast<double>(node_count_));
  if (dim_ == 1) {
    for (int a = 0; a < n_; ++a) {
      const double phase = (wavenumber(a) % 2 == 0) ? 1.0 : -1.0;
      const auto c = spectrum[static_cast<std::size_t>(a)] * phase;
      in.data[a][0] = c.real();
      in.data[a][1] = c.imag();
    }
  } else {
    std::size_t flat = 0;
    for (int i0 = 0; i0 < n_; ++i0) {
      const double p0 = (wavenumber(i0) % 2 == 0) ? 1.0 : -1.0;
      for (int i1 = 0; i1 < n_; ++i1, ++flat) {
        const double p1 = (wavenumber(i1) % 2 == 0) ? 1.0 : -1.0;
        const auto c = spectrum[flat] * (p0 * p1);
        in.data[flat][0] = c.real();
        in.data[flat][1] = c.imag();
      }
    }
  }
  fftw_execute_dft(plans_->backward, in.data, out.data);
  std::vector<double> values(node_count_);
  for (std::size_t i = 0; i < node_count_; ++i) values[i] = out.data[i][0] * scale;
  return values;
}

std::vector<double> Grid::apply_multiplier(std::span<const double> values,
                                           std::span<const std::complex<double>> multiplier) const {
  if (values.size() != node_count_ || multiplier.size() != node_count_)
    throw std::invalid_argument("grid: apply_multiplier size mismatch");
  FftwBuffer a(node_count_), b(node_count_);
  for (std::size_t i = 0; i < node_count_; ++i) {
    a.data[i][0] = values[i];
    a.data[i][1] = 0.0;
  }
  fftw_execute_dft(plans_->forward, a.data, b.data);
  for (std::size_t i = 0; i < node_count_; ++i) {
    const std::complex<double> c(b.data[i][0], b.data[i][1]);
    const std::complex<double> r = c * multiplier[i];
    b.data[i][0] = r.real();
    b.data[i][1] = r.imag();
  }
  fftw_execute_dft(plans_->backward, b.data, a.data);
  const double scale = 1.0 / static_cast<double>(node_count_);
  std::vector<double> out(node_count_);
  for (std::size_t i = 0; i < node_count_; ++i) out[i] = a.data[i][0] * scale;
  return out;
}

Field::Field(GridPtr grid)
    : grid_(std::move(grid)), values_(grid_->node_count(), 0.0) {}

Field::Field(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->node_count())
    throw std::invalid_argument("field: value count does not match grid");
}

Field Field::sample(const GridPtr& grid, const std::function<double(const double*)>& fn) {
  Field f(grid);
  double x[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) {
    grid->node_position(i, x);
    f[i] = fn(x);
  }
  return f;
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void write_snapshot(const Field& field, const std::string& path_base, double time,
                    const std::string& params_json, bool with_csv) {
  const Grid& g = field.grid();
  {
    std::ofstream raw(path_base + ".f64", std::ios::binary | std::ios::trunc);
    if (!raw) throw std::runtime_error("snapshot: cannot open " + path_base + ".f64");
    raw.write(reinterpret_cast<const char*>(field.values().data()),
              static_cast<std::streamsize>(field.size() * sizeof(double)));
  }
  nlohmann::json sidecar = {
      {"dim", g.dim()},
      {"L", g.half_length()},
      {"n", g.points_per_axis()},
      {"time", time},
      {"params", params_json.empty() ? nlohmann::json::object()
                                     : nlohmann::json::parse(params_json)},
  };
  {
    std::ofstream side(path_base + ".json", std::ios::trunc);
    if (!side) throw std::runtime_error("snapshot: cannot open " + path_base + ".json");
    side << sidecar.dump(2) << "\n";
  }
  if (with_csv) {
    std::ofstream csv(path_base + ".csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("snapshot: cannot open " + path_base + ".csv");
    csv << (g.dim() == 1 ? "x,value\n" : "x,y,value\n");
    char line[128];
    double x[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < field.size(); ++i) {
      g.node_position(i, x);
      if (g.dim() == 1)
        std::snprintf(line, sizeof(line), "%.17g,%.17g\n", x[0], field[i]);
      else
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", x[0], x[1], field[i]);
      csv << line;
    }
  }
}

Field read_snapshot(const std::string& path_base, double* time_out) {
  std::ifstream side(path_base + ".json");
  if (!side) throw std::runtime_error("snapshot: missing sidecar " + path_base + ".json");
  nlohmann::json sidecar = nlohmann::json::parse(side);
  const int dim = sidecar.at("dim").get<int>();
  const double L = sidecar.at("L").get<double>();
  const int n = sidecar.at("n").get<int>();
  if (time_out) *time_out = sidecar.at("time").get<double>();

  GridPtr grid = Grid::make(dim, L, n);
  std::ifstream raw(path_base + ".f64", std::ios::binary);
  if (!raw) throw std::runtime_error("snapshot: missing payload " + path_base + ".f64");
  std::vector<double> values(grid->node_count());
  raw.read(reinterpret_cast<char*>(values.data()),
           static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (static_cast<std::size_t>(raw.gcount()) != values.size() * sizeof(double))
    throw std::runtime_error("snapshot: payload size does not match sidecar");
  return Field(std::move(grid), std::move(values));
}

} // namespace nlpme
