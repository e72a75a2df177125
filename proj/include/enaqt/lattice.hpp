#pragma once

// Lattice geometries and the single-excitation hopping matrix.
//
// Sites are indexed row-major: in 2D, site i sits at (x, y) = (i % L, i / L).
// All lengths are in units of the lattice constant and all energies in units
// of the nearest-neighbour hopping J.

#include <array>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "enaqt/error.hpp"

namespace enaqt {

enum class Dimension { One, Two };
enum class Boundary { Open, Periodic };
enum class HoppingModel { Dipolar, NearestNeighbor };

using HoppingMatrix = Eigen::MatrixXd;

struct LatticeSpec {
  Dimension dims = Dimension::Two;
  int L = 5;
  Boundary boundary = Boundary::Open;
  double lattice_constant = 1.0;
  double alpha = 3.0;
  HoppingModel hopping = HoppingModel::Dipolar;
  /// Sink site; the geometric centre when unset.
  std::optional<int> sink;

  static LatticeSpec chain(int L, HoppingModel model = HoppingModel::NearestNeighbor,
                           Boundary bc = Boundary::Open) {
    LatticeSpec s;
    s.dims = Dimension::One;
    s.L = L;
    s.hopping = model;
    s.boundary = bc;
    return s;
  }

  static LatticeSpec square(int L, HoppingModel model = HoppingModel::Dipolar,
                            Boundary bc = Boundary::Open) {
    LatticeSpec s;
    s.dims = Dimension::Two;
    s.L = L;
    s.hopping = model;
    s.boundary = bc;
    return s;
  }

  [[nodiscard]] int site_count() const { return dims == Dimension::One ? L : L * L; }

  /// Row-major centre: (L-1)/2 in 1D, (L/2)*L + L/2 in 2D, i.e. (L^2-1)/2 for odd L.
  [[nodiscard]] int center_site() const {
    return dims == Dimension::One ? (L - 1) / 2 : (L / 2) * L + L / 2;
  }

  [[nodiscard]] int sink_index() const { return sink.value_or(center_site()); }

  /// Dipolar coupling constant C such that C / a^alpha equals the nearest-neighbour rate J.
  [[nodiscard]] double coupling_constant(double J) const {
    return J * std::pow(lattice_constant, alpha);
  }
};

inline void validate(const LatticeSpec& spec) {
  if (spec.L < 2) throw InvalidSpec("lattice needs L >= 2, got L=" + std::to_string(spec.L));
  if (!(spec.lattice_constant > 0.0)) throw InvalidSpec("lattice constant must be positive");
  if (!(spec.alpha > 0.0)) throw InvalidSpec("power-law exponent alpha must be positive");
  const int s = spec.sink_index();
  if (s < 0 || s >= spec.site_count())
    throw InvalidSpec("sink index " + std::to_string(s) + " outside [0, " +
                      std::to_string(spec.site_count()) + ")");
}

/// Integer coordinates of site i in units of a; y is 0 for chains.
inline std::array<int, 2> site_coordinates(const LatticeSpec& spec, int i) {
  if (i < 0 || i >= spec.site_count())
    throw InvalidSpec("site index " + std::to_string(i) + " out of range");
  if (spec.dims == Dimension::One) return {i, 0};
  return {i % spec.L, i / spec.L};
}

inline int site_index(const LatticeSpec& spec, int x, int y = 0) {
  return spec.dims == Dimension::One ? x : y * spec.L + x;
}

namespace detail {

// Displacement along one axis; periodic lattices use the minimum image.
inline int axis_offset(int d, int L, Boundary bc) {
  if (bc == Boundary::Periodic) {
    d = ((d % L) + L) % L;
    if (d > L - d) d -= L;
  }
  return d;
}

}  // namespace detail

/// Hopping matrix J_ij of the single-excitation Hamiltonian.
///
/// Dipolar couplings are J (a/|r_i - r_j|)^alpha; on periodic lattices the
/// minimum-image distance on the ring/torus is used (no Ewald summation).
/// Nearest-neighbour couplings are J for adjacent sites (wrapping around for
/// periodic boundaries) and zero otherwise. The result is exactly symmetric.
inline HoppingMatrix build_hopping(const LatticeSpec& spec, double J = 1.0) {
  validate(spec);
  const int n = spec.site_count();
  HoppingMatrix h = HoppingMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const auto ri = site_coordinates(spec, i);
    for (int j = i + 1; j < n; ++j) {
      const auto rj = site_coordinates(spec, j);
      const int dx = detail::axis_offset(rj[0] - ri[0], spec.L, spec.boundary);
      const int dy = spec.dims == Dimension::Two
                         ? detail::axis_offset(rj[1] - ri[1], spec.L, spec.boundary)
                         : 0;
      double value = 0.0;
      if (spec.hopping == HoppingModel::NearestNeighbor) {
        if (std::abs(dx) + std::abs(dy) == 1) value = J;
      } else {
        const double r = std::sqrt(double(dx) * dx + double(dy) * dy);
        value = J / std::pow(r, spec.alpha);
      }
      h(i, j) = value;
      h(j, i) = value;
    }
  }
  return h;
}

inline std::string to_string(Dimension d) { return d == Dimension::One ? "1d" : "2d"; }
inline std::string to_string(Boundary b) { return b == Boundary::Open ? "open" : "periodic"; }
inline std::string to_string(HoppingModel m) {
  return m == HoppingModel::Dipolar ? "dipolar" : "nearest_neighbor";
}

}  // namespace enaqt
