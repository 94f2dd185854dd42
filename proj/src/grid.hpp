#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlpme {

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Periodic box [-L, L)^dim sampled on n points per axis, together with its
/// discrete Fourier transform pair and frequency bookkeeping.
///
/// Forward convention:  u_hat(xi) = sum_x u(x) e^{-i xi.x} dx^dim,
/// with xi_k = pi k / L, k in {-n/2, ..., n/2-1} per axis, so continuum
/// Fourier symbols apply verbatim to the discrete spectrum.
///
/// Immutable after construction; safe for unlimited concurrent readers.
class Grid : public std::enable_shared_from_this<Grid> {
public:
  /// dim in {1,2}; half_length > 0; points_per_axis a power of two >= 8.
  static GridPtr make(int dim, double half_length, int points_per_axis);

  ~Grid();
  Grid(const Grid&) = delete;
  Grid& operator=(const Grid&) = delete;

  int dim() const { return dim_; }
  double half_length() const { return half_length_; }
  int points_per_axis() const { return n_; }
  double dx() const { return dx_; }
  std::size_t node_count() const { return node_count_; }
  double cell_volume() const { return cell_volume_; }
  double box_volume() const { return box_volume_; }

  /// Physical coordinate of node `index` along any axis: -L + index*dx.
  double coordinate(int index) const { return -half_length_ + index * dx_; }

  /// Signed integer wavenumber for a storage index a in [0, n):
  /// k = a for a < n/2, k = a - n otherwise (Nyquist maps to -n/2).
  int wavenumber(int storage_index) const {
    return storage_index < n_ / 2 ? storage_index : storage_index - n_;
  }

  /// Discrete frequency xi_k = pi k / L for a storage index.
  double frequency(int storage_index) const {
    return freq_[static_cast<std::size_t>(storage_index)];
  }

  bool is_nyquist(int storage_index) const { return storage_index == n_ / 2; }

  /// Flat row-major index; in 2D index = i0 * n + i1.
  std::size_t flat_index(int i0, int i1 = 0) const {
    return static_cast<std::size_t>(i0) * (dim_ == 2 ? static_cast<std::size_t>(n_) : 1) +
           static_cast<std::size_t>(dim_ == 2 ? i1 : 0);
  }

  /// Per-node physical coordinates of a flat index (size = dim).
  void node_position(std::size_t flat, double* x_out) const;

  /// Per-mode frequency vector of a flat index (size = dim).
  void mode_frequency(std::size_t flat, double* xi_out) const;

  /// Euclidean |xi| of a flat mode index.
  double mode_magnitude(std::size_t flat) const;

  /// True if the flat mode index touches the Nyquist row/column on `axis`.
  bool mode_on_nyquist(std::size_t flat, int axis) const;

  /// Visit every mode: fn(flat_index, xi_vector pointing at dim doubles).
  void for_each_mode(const std::function<void(std::size_t, const double*)>& fn) const;

  /// Forward transform in the stated convention (dx^dim scale, phases for
  /// the [-L, L) coordinate origin included).
  std::vector<std::complex<double>> transform(std::span<const double> values) const;

  /// Inverse of transform(); exact round trip up to rounding.
  std::vector<double> inverse_transform(std::span<const std::complex<double>> spectrum) const;

  /// Multiply the spectrum by a per-mode complex multiplier and transform
  /// back, returning the real part. The multiplier must be Hermitian under
  /// index negation for the result to be genuinely real; the convention
  /// phases cancel so this is equivalent to acting in transform() space.
  std::vector<double> apply_multiplier(std::span<const double> values,
                                       std::span<const std::complex<double>> multiplier) const;

private:
  Grid(int dim, double half_length, int n);

  int dim_;
  double half_length_;
  int n_;
  double dx_;
  std::size_t node_count_;
  double cell_volume_;
  double box_volume_;
  std::vector<double> freq_;

  struct FftPlans;
  std::unique_ptr<FftPlans> plans_;
};

/// Scalar sample of a function on a Grid. Value-like: copyable and movable;
/// transferable between threads (the grid itself is shared immutable state).
class Field {
public:
  explicit Field(GridPtr grid);
  Field(GridPtr grid, std::vector<double> values);

  /// Sample fn(x) at every node. fn receives a pointer to dim coordinates.
  static Field sample(const GridPtr& grid,
                      const std::function<double(const double*)>& fn);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  bool all_finite() const;

private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// Snapshot persistence: `<base>.f64` holds the raw little-endian doubles in
/// row-major order, `<base>.json` the sidecar header (dim, L, n, time plus
/// caller-supplied params), `<base>.csv` an optional tidy export with the
/// coordinate columns followed by the value column.
void write_snapshot(const Field& field, const std::string& path_base, double time,
                    const std::string& params_json, bool with_csv = false);

/// Load a snapshot pair written by write_snapshot. Throws on missing files,
/// size mismatch, or a sidecar that disagrees with its payload.
Field read_snapshot(const std::string& path_base, double* time_out = nullptr);

} // namespace nlpme
