#include "hybridsim/limitset.hpp"

#include <atomic>
#include <cmath>

#include "hybridsim/errors.hpp"
#include "hybridsim/parallel.hpp"
#include "hybridsim/rng.hpp"

namespace hybridsim::limitset {

using flow::Vec;

OccupancyGrid::OccupancyGrid(measure::GridSpec grid_in, double h_in)
    : grid(std::move(grid_in)), h(h_in), visits(static_cast<std::size_t>(grid.cell_count()), 0),
      epochs(static_cast<std::size_t>(grid.cell_count()), 0),
      epoch_start(static_cast<std::size_t>(grid.cell_count()), 0.0) {
  grid.validate();
  if (!(h > 0.0)) throw DomainError("switch period h must be positive");
}

void OccupancyGrid::add(double t, std::span<const double> x) {
  const long cell = grid.locate(x);
  if (cell < 0) return;  // outside the box: not a limit-set candidate
  const auto i = static_cast<std::size_t>(cell);
  ++visits[i];
  if (epochs[i] == 0 || t - epoch_start[i] >= h) {
    ++epochs[i];
    epoch_start[i] = t;
  }
}

LimitSetEstimate estimate_limit_set(const hybrid::HybridSystemSpec& spec, const hybrid::HybridState& y0,
                                    double t_total, double sample_dt, double burn_in_time, int revisit_threshold,
                                    const measure::GridSpec& grid, std::uint64_t seed, std::uint64_t stream) {
  if (!(t_total > burn_in_time)) throw DomainError("t_total must exceed the burn-in time");
  if (revisit_threshold < 1) throw DomainError("revisit threshold must be at least 1");
  if (grid.dim() != spec.fields.dimension()) throw GridMismatchError("grid dimension does not match the system");

  OccupancyGrid occupancy(grid, spec.h);
  hybrid::walk(spec, y0, t_total, sample_dt, seed, stream, [&](double t, std::span<const double> x, int) {
    if (t > burn_in_time) occupancy.add(t, x);
  });

  std::vector<long> cells;
  for (long c = 0; c < grid.cell_count(); ++c)
    if (occupancy.epochs[static_cast<std::size_t>(c)] >= revisit_threshold) cells.push_back(c);
  return LimitSetEstimate{grid, std::move(cells), std::move(occupancy)};
}

HittingBound hitting_bound(const markov::TransitionMatrix& q, double x_star, int z0) {
  if (q.size() != 2) throw DomainError("hitting bound applies to the two-state linear system");
  if (z0 != 0 && z0 != 1) throw IndexOutOfRangeError("state", z0, 2);
  if (!(x_star > -1.0 && x_star < 1.0)) throw DomainError("x_star must lie in (-1, 1)");

  const double t_cross = std::log(2.0 / (1.0 + x_star));
  int k = static_cast<int>(std::ceil(t_cross - 1e-9));
  if (k < 1) k = 1;

  const double p_hold_low = q.prob(1, 1);
  const double p_lower = (z0 == 0) ? q.prob(0, 1) * std::pow(p_hold_low, k - 1) : std::pow(p_hold_low, k);
  return HittingBound{k, p_lower};
}

double hitting_experiment(const hybrid::HybridSystemSpec& spec, double x0, int z0, double x_star, long horizon_mk,
                          long trials, std::uint64_t seed, int threads) {
  if (spec.fields.dimension() != 1) throw DomainError("hitting experiment applies to one-dimensional systems");
  if (z0 < 0 || z0 >= spec.q.size()) throw IndexOutOfRangeError("state", z0, spec.q.size());
  if (trials < 1) throw DomainError("need at least one trial");
  if (horizon_mk < 0) throw DomainError("horizon must be nonnegative");

  constexpr long kChunk = 1024;
  const long n_tasks = (trials + kChunk - 1) / kChunk;
  std::atomic<long> hits{0};

  parallel_tasks(n_tasks, threads, [&](long task) {
    long local = 0;
    const long lo = task * kChunk;
    const long hi = std::min(trials, lo + kChunk);
    for (long trial = lo; trial < hi; ++trial) {
      const CounterRng rng(seed, static_cast<std::uint64_t>(trial));
      Vec x{x0};
      int s = z0;
      std::uint64_t draws = 0;
      // horizon_mk transitions plus the lead-in interval before the first one
      for (long period = 0; period <= horizon_mk; ++period) {
        const Vec x_next = flow_map(spec.fields, x, s, spec.h, spec.integrator);
        // each per-state flow is monotone, so a bracket means a crossing
        if ((x[0] - x_star) * (x_next[0] - x_star) <= 0.0) {
          ++local;
          break;
        }
        x = x_next;
        if (period < horizon_mk) s = markov::sample_next(spec.q, s, rng.uniform(draws++));
      }
    }
    hits.fetch_add(local);
  });

  return static_cast<double>(hits.load()) / static_cast<double>(trials);
}

}  // namespace hybridsim::limitset
