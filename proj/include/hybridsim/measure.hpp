#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hybridsim/hybrid.hpp"

namespace hybridsim::measure {

using flow::Vec;
using hybrid::Box;

/// Rectangular grid over the domain box. Cells are half-open along each axis
/// except that the top edge belongs to the last cell; points outside the box
/// fall in the overflow bin. Cell indices are row-major with axis 0 slowest.
struct GridSpec {
  Box box;
  std::vector<int> bins;

  int dim() const { return static_cast<int>(box.size()); }
  long cell_count() const;
  double width(int axis) const;
  /// Flat cell index, or -1 for a point outside the box.
  long locate(std::span<const double> x) const;
  Vec center(long cell) const;
  /// Per-axis bin indices of a flat cell index.
  std::vector<int> coords(long cell) const;
  void validate() const;

  bool operator==(const GridSpec& other) const;
};

/// Normalized histogram on grid x states plus an overflow bin for mass
/// outside the box, tagged with the phase t0 in [0,h) it was sampled at.
struct GridMeasure {
  GridSpec grid;
  int states;
  double phase;
  std::vector<double> weights;  // states * cell_count, state-major
  double overflow;

  GridMeasure(GridSpec grid, int states, double phase);

  double& at(int state, long cell);
  double at(int state, long cell) const;
  std::span<const double> sheet(int state) const;
  double sheet_mass(int state) const;
  double total_mass() const;
  /// Throws DomainError unless all weights are nonnegative and total mass is
  /// 1 within 1e-9.
  void check_mass() const;
};

/// Position-only histogram (states summed out).
struct MarginalMeasure {
  GridSpec grid;
  std::vector<double> weights;
  double overflow;

  double total_mass() const;
};

/// Empirical phase-t0 measure from one long trajectory: the first burn_in
/// switching periods are discarded, then the section at t0 + k*h is binned
/// for k = 1..n_samples and the histogram normalized to mass 1.
GridMeasure empirical_measure(const hybrid::HybridSystemSpec& spec, const hybrid::HybridState& y0, double t0,
                              long burn_in, long n_samples, const GridSpec& grid, std::uint64_t seed,
                              std::uint64_t stream = 0);

/// One empirical measure per requested phase, all sampled from a single
/// shared trajectory pass.
std::vector<GridMeasure> phase_family(const hybrid::HybridSystemSpec& spec, const hybrid::HybridState& y0,
                                      std::span<const double> phases, long burn_in, long n_samples,
                                      const GridSpec& grid, std::uint64_t seed, std::uint64_t stream = 0);

/// Sums sheets across states; mass is preserved exactly.
MarginalMeasure marginalize(const GridMeasure& mu);

struct TransferOptions {
  /// Representative points per cell axis for the grid transfer. 1 transports
  /// cell centers; larger values stratify each cell and cut aliasing of
  /// fine-structured measures at proportional cost.
  int points_per_axis = 1;
  int threads = 1;
};

/// Transports mu by the hybrid dynamics over time t >= 0: full switching
/// periods as exact chain-weighted grid transfers at the measure's phase,
/// then the fractional remainder as a deterministic flow per sheet (with the
/// chain mixing applied at the switch boundary when the remainder crosses
/// it). The result's phase is (t0 + r) mod h; mass outside the box
/// accumulates in the overflow bin and overflow mass stays put.
GridMeasure pushforward(const hybrid::HybridSystemSpec& spec, const GridMeasure& mu, double t,
                        const TransferOptions& options = {});

/// 0.5 * sum of |a - b| over all cells, sheets and the overflow bin.
double total_variation(const GridMeasure& a, const GridMeasure& b);
double total_variation(const MarginalMeasure& a, const MarginalMeasure& b);

}  // namespace hybridsim::measure
