#pragma once

#include <cstdint>
#include <vector>

#include "hybridsim/hybrid.hpp"
#include "hybridsim/measure.hpp"

namespace hybridsim::limitset {

/// Per-cell visit bookkeeping for limit-set estimation. A new revisit epoch
/// starts when a cell is visited at least one switch period after the start
/// of its previous epoch, so a cell occupied continuously keeps accruing
/// epochs. Counts only ever grow as samples are added.
struct OccupancyGrid {
  measure::GridSpec grid;
  double h;
  std::vector<std::int64_t> visits;
  std::vector<int> epochs;
  std::vector<double> epoch_start;

  OccupancyGrid(measure::GridSpec grid, double h);
  void add(double t, std::span<const double> x);
};

struct LimitSetEstimate {
  measure::GridSpec grid;
  std::vector<long> cells;  // ascending flat indices with epochs >= threshold
  OccupancyGrid occupancy;
};

/// Numerical stochastic limit set: simulates past burn_in_time, samples
/// continuous time every sample_dt, and returns the cells revisited in at
/// least revisit_threshold distinct epochs.
LimitSetEstimate estimate_limit_set(const hybrid::HybridSystemSpec& spec, const hybrid::HybridState& y0,
                                    double t_total, double sample_dt, double burn_in_time, int revisit_threshold,
                                    const measure::GridSpec& grid, std::uint64_t seed, std::uint64_t stream = 0);

struct HittingBound {
  int k;           // consecutive low-state periods needed to decay from 1 to x_star
  double p_lower;  // probability of that run, by initial state
};

/// Analytic lower-bound ingredients for crossing x_star in the two-state
/// linear system with states (+1, -1): k = ceil(ln(2/(1+x_star))) from the
/// decay x(t) = -1 + 2 exp(-t) started at the supremum x0 = 1, and
/// p_lower = P(+1 -> -1) * P(-1 -> -1)^(k-1) from state +1 or
/// P(-1 -> -1)^k from state -1. Requires x_star in (-1, 1).
HittingBound hitting_bound(const markov::TransitionMatrix& q, double x_star, int z0);

/// Fraction of trials whose trajectory crosses x_star within horizon_mk
/// switching transitions (the interval before the first transition is a
/// lead-in and is checked too). Trials use per-trial streams of the seed.
double hitting_experiment(const hybrid::HybridSystemSpec& spec, double x0, int z0, double x_star, long horizon_mk,
                          long trials, std::uint64_t seed, int threads = 1);

}  // namespace hybridsim::limitset
