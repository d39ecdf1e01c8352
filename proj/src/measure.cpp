#include "hybridsim/measure.hpp"

#include <cmath>

#include "hybridsim/errors.hpp"
#include "hybridsim/parallel.hpp"

namespace hybridsim::measure {

long GridSpec::cell_count() const {
  long n = 1;
  for (int b : bins) n *= b;
  return n;
}

double GridSpec::width(int axis) const {
  return (box[static_cast<std::size_t>(axis)].hi - box[static_cast<std::size_t>(axis)].lo) /
         bins[static_cast<std::size_t>(axis)];
}

long GridSpec::locate(std::span<const double> x) const {
  long idx = 0;
  for (std::size_t a = 0; a < box.size(); ++a) {
    const double lo = box[a].lo, hi = box[a].hi;
    const double v = x[a];
    if (v < lo || v > hi || std::isnan(v)) return -1;
    auto i = static_cast<long>((v - lo) / (hi - lo) * bins[a]);
    if (i >= bins[a]) i = bins[a] - 1;  // top edge belongs to the last cell
    idx = idx * bins[a] + i;
  }
  return idx;
}

Vec GridSpec::center(long cell) const {
  const auto c = coords(cell);
  Vec x(box.size());
  for (std::size_t a = 0; a < box.size(); ++a) x[a] = box[a].lo + (c[a] + 0.5) * width(static_cast<int>(a));
  return x;
}

std::vector<int> GridSpec::coords(long cell) const {
  std::vector<int> c(box.size());
  for (std::size_t a = box.size(); a-- > 0;) {
    c[a] = static_cast<int>(cell % bins[a]);
    cell /= bins[a];
  }
  return c;
}

void GridSpec::validate() const {
  if (box.empty() || box.size() != bins.size()) throw DomainError("grid box and bins must have equal dimension");
  for (std::size_t a = 0; a < box.size(); ++a) {
    if (!(box[a].lo < box[a].hi)) throw DomainError("grid axis must have lo < hi");
    if (bins[a] < 1) throw DomainError("grid needs at least one bin per axis");
  }
}

bool GridSpec::operator==(const GridSpec& other) const {
  if (bins != other.bins || box.size() != other.box.size()) return false;
  for (std::size_t a = 0; a < box.size(); ++a)
    if (box[a].lo != other.box[a].lo || box[a].hi != other.box[a].hi) return false;
  return true;
}

GridMeasure::GridMeasure(GridSpec grid_in, int states_in, double phase_in)
    : grid(std::move(grid_in)), states(states_in), phase(phase_in),
      weights(static_cast<std::size_t>(states_in) * static_cast<std::size_t>(grid.cell_count()), 0.0), overflow(0.0) {
  grid.validate();
  if (states < 1) throw DomainError("measure needs at least one state sheet");
}

double& GridMeasure::at(int state, long cell) {
  return weights[static_cast<std::size_t>(state) * static_cast<std::size_t>(grid.cell_count()) +
                 static_cast<std::size_t>(cell)];
}

double GridMeasure::at(int state, long cell) const {
  return weights[static_cast<std::size_t>(state) * static_cast<std::size_t>(grid.cell_count()) +
                 static_cast<std::size_t>(cell)];
}

std::span<const double> GridMeasure::sheet(int state) const {
  const auto cells = static_cast<std::size_t>(grid.cell_count());
  return {weights.data() + static_cast<std::size_t>(state) * cells, cells};
}

double GridMeasure::sheet_mass(int state) const {
  double acc = 0.0;
  for (double w : sheet(state)) acc += w;
  return acc;
}

double GridMeasure::total_mass() const {
  double acc = overflow;
  for (double w : weights) acc += w;
  return acc;
}

void GridMeasure::check_mass() const {
  if (overflow < 0.0) throw DomainError("measure overflow is negative");
  for (double w : weights)
    if (w < 0.0) throw DomainError("measure has a negative weight");
  const double mass = total_mass();
  if (std::abs(mass - 1.0) > 1e-9) throw DomainError("measure mass is " + std::to_string(mass) + ", expected 1");
}

double MarginalMeasure::total_mass() const {
  double acc = overflow;
  for (double w : weights) acc += w;
  return acc;
}

GridMeasure empirical_measure(const hybrid::HybridSystemSpec& spec, const hybrid::HybridState& y0, double t0,
                              long burn_in, long n_samples, const GridSpec& grid, std::uint64_t seed,
                              std::uint64_t stream) {
  const double phases[1] = {t0};
  return phase_family(spec, y0, phases, burn_in, n_samples, grid, seed, stream).front();
}

std::vector<GridMeasure> phase_family(const hybrid::HybridSystemSpec& spec, const hybrid::HybridState& y0,
                                      std::span<const double> phases, long burn_in, long n_samples,
                                      const GridSpec& grid, std::uint64_t seed, std::uint64_t stream) {
  grid.validate();
  if (grid.dim() != spec.fields.dimension()) throw GridMismatchError("grid dimension does not match the system");
  if (phases.empty()) throw DomainError("need at least one phase");

  std::vector<GridMeasure> family;
  family.reserve(phases.size());
  for (double t0 : phases) family.emplace_back(grid, spec.q.size(), t0);

  hybrid::walk_sections(spec, y0, phases, burn_in, n_samples, seed, stream,
                        [&](long, std::size_t phase_index, std::span<const double> x, int state) {
                          GridMeasure& mu = family[phase_index];
                          const long cell = grid.locate(x);
                          if (cell < 0)
                            mu.overflow += 1.0;
                          else
                            mu.at(state, cell) += 1.0;
                        });
  for (GridMeasure& mu : family) {
    for (double& w : mu.weights) w /= static_cast<double>(n_samples);
    mu.overflow /= static_cast<double>(n_samples);
  }
  return family;
}

MarginalMeasure marginalize(const GridMeasure& mu) {
  MarginalMeasure out{mu.grid, std::vector<double>(static_cast<std::size_t>(mu.grid.cell_count()), 0.0), mu.overflow};
  const long cells = mu.grid.cell_count();
  for (int s = 0; s < mu.states; ++s)
    for (long c = 0; c < cells; ++c) out.weights[static_cast<std::size_t>(c)] += mu.at(s, c);
  return out;
}

namespace {

// Stratified representative points of one cell, points_per_axis per axis.
void for_each_representative(const GridSpec& grid, long cell, int points_per_axis,
                             const std::function<void(const Vec&, double)>& fn) {
  const int d = grid.dim();
  const auto c = grid.coords(cell);
  long reps = 1;
  for (int a = 0; a < d; ++a) reps *= points_per_axis;
  const double share = 1.0 / static_cast<double>(reps);
  Vec x(static_cast<std::size_t>(d));
  for (long r = 0; r < reps; ++r) {
    long rest = r;
    for (int a = d - 1; a >= 0; --a) {
      const int sub = static_cast<int>(rest % points_per_axis);
      rest /= points_per_axis;
      x[static_cast<std::size_t>(a)] =
          grid.box[static_cast<std::size_t>(a)].lo +
          (c[static_cast<std::size_t>(a)] + (sub + 0.5) / points_per_axis) * grid.width(a);
    }
    fn(x, share);
  }
}

struct TransferBuffers {
  std::vector<std::vector<double>> weights;  // one buffer per task
  std::vector<double> overflow;
};

// Runs `deposit` for every populated source cell, accumulating into per-task
// buffers that are merged in task order: bit-identical for any thread count.
void run_transfer(const GridMeasure& src, GridMeasure& dst, int threads,
                  const std::function<void(int state, long cell, double weight, std::vector<double>& buf,
                                           double& over)>& deposit) {
  const long cells = src.grid.cell_count();
  const long total = static_cast<long>(src.states) * cells;
  constexpr long kTaskSize = 512;
  const long n_tasks = (total + kTaskSize - 1) / kTaskSize;

  TransferBuffers buffers;
  buffers.weights.assign(static_cast<std::size_t>(n_tasks), {});
  buffers.overflow.assign(static_cast<std::size_t>(n_tasks), 0.0);

  parallel_tasks(n_tasks, threads, [&](long task) {
    auto& buf = buffers.weights[static_cast<std::size_t>(task)];
    buf.assign(src.weights.size(), 0.0);
    double& over = buffers.overflow[static_cast<std::size_t>(task)];
    const long lo = task * kTaskSize;
    const long hi = std::min(total, lo + kTaskSize);
    for (long flat = lo; flat < hi; ++flat) {
      const int state = static_cast<int>(flat / cells);
      const long cell = flat % cells;
      const double w = src.at(state, cell);
      if (w == 0.0) continue;
      deposit(state, cell, w, buf, over);
    }
  });

  for (long task = 0; task < n_tasks; ++task) {
    const auto& buf = buffers.weights[static_cast<std::size_t>(task)];
    for (std::size_t i = 0; i < dst.weights.size(); ++i) dst.weights[i] += buf[i];
    dst.overflow += buffers.overflow[static_cast<std::size_t>(task)];
  }
}

// One full switching period at the measure's phase: flow h-t0 in the source
// state, switch with weight P(i,j), flow t0 in the target state.
GridMeasure transfer_period(const hybrid::HybridSystemSpec& spec, const GridMeasure& mu,
                            const TransferOptions& options) {
  GridMeasure out(mu.grid, mu.states, mu.phase);
  out.overflow = mu.overflow;
  const long cells = mu.grid.cell_count();
  const double t0 = mu.phase;
  run_transfer(mu, out, options.threads,
               [&](int state, long cell, double w, std::vector<double>& buf, double& over) {
                 for_each_representative(mu.grid, cell, options.points_per_axis, [&](const Vec& p, double share) {
                   const Vec mid = flow_map(spec.fields, p, state, spec.h - t0, spec.integrator);
                   for (int j = 0; j < spec.q.size(); ++j) {
                     const double pij = spec.q.prob(state, j);
                     if (pij == 0.0) continue;
                     const Vec y = flow_map(spec.fields, mid, j, t0, spec.integrator);
                     const long target = mu.grid.locate(y);
                     const double dep = w * share * pij;
                     if (target < 0)
                       over += dep;
                     else
                       buf[static_cast<std::size_t>(j) * static_cast<std::size_t>(cells) +
                           static_cast<std::size_t>(target)] += dep;
                   }
                 });
               });
  return out;
}

// Deterministic flow of duration q applied sheet by sheet; no chain step.
GridMeasure transfer_flow(const hybrid::HybridSystemSpec& spec, const GridMeasure& mu, double q, double new_phase,
                          const TransferOptions& options) {
  GridMeasure out(mu.grid, mu.states, new_phase);
  out.overflow = mu.overflow;
  const long cells = mu.grid.cell_count();
  run_transfer(mu, out, options.threads,
               [&](int state, long cell, double w, std::vector<double>& buf, double& over) {
                 for_each_representative(mu.grid, cell, options.points_per_axis, [&](const Vec& p, double share) {
                   const Vec y = flow_map(spec.fields, p, state, q, spec.integrator);
                   const long target = mu.grid.locate(y);
                   const double dep = w * share;
                   if (target < 0)
                     over += dep;
                   else
                     buf[static_cast<std::size_t>(state) * static_cast<std::size_t>(cells) +
                         static_cast<std::size_t>(target)] += dep;
                 });
               });
  return out;
}

// Chain step at a switch boundary: positions are unchanged, sheets mix by Q.
GridMeasure mix_states(const hybrid::HybridSystemSpec& spec, const GridMeasure& mu, double new_phase) {
  GridMeasure out(mu.grid, mu.states, new_phase);
  out.overflow = mu.overflow;
  const long cells = mu.grid.cell_count();
  for (int i = 0; i < mu.states; ++i)
    for (long c = 0; c < cells; ++c) {
      const double w = mu.at(i, c);
      if (w == 0.0) continue;
      for (int j = 0; j < mu.states; ++j) {
        const double pij = spec.q.prob(i, j);
        if (pij != 0.0) out.at(j, c) += w * pij;
      }
    }
  return out;
}

}  // namespace

GridMeasure pushforward(const hybrid::HybridSystemSpec& spec, const GridMeasure& mu, double t,
                        const TransferOptions& options) {
  if (t < 0.0 || std::isnan(t)) throw DomainError("push-forward time must be nonnegative");
  if (options.points_per_axis < 1) throw DomainError("points_per_axis must be at least 1");
  if (mu.states != spec.q.size()) throw GridMismatchError("measure state count does not match the system");
  if (mu.grid.dim() != spec.fields.dimension()) throw GridMismatchError("measure grid dimension mismatch");

  const double h = spec.h;
  auto periods = static_cast<long>(std::floor(t / h + 1e-12));
  double rem = t - static_cast<double>(periods) * h;
  if (rem < 1e-12 * h) rem = 0.0;

  if (periods == 0 && rem == 0.0) return mu;

  GridMeasure cur = mu;
  for (long k = 0; k < periods; ++k) cur = transfer_period(spec, cur, options);
  if (rem > 0.0) {
    const double t0 = cur.phase;
    if (t0 + rem < h * (1.0 - 1e-12)) {
      cur = transfer_flow(spec, cur, rem, t0 + rem, options);
    } else {
      // The fractional flow crosses the switch at offset h - t0.
      const double to_boundary = h - t0;
      double past = rem - to_boundary;
      if (past < 1e-12 * h) past = 0.0;
      if (to_boundary > 1e-12 * h) cur = transfer_flow(spec, cur, to_boundary, 0.0, options);
      cur = mix_states(spec, cur, 0.0);
      if (past > 0.0) cur = transfer_flow(spec, cur, past, past, options);
    }
  }
  return cur;
}

double total_variation(const GridMeasure& a, const GridMeasure& b) {
  if (!(a.grid == b.grid) || a.states != b.states)
    throw GridMismatchError("total variation requires identical grids and state counts");
  double acc = std::abs(a.overflow - b.overflow);
  for (std::size_t i = 0; i < a.weights.size(); ++i) acc += std::abs(a.weights[i] - b.weights[i]);
  return 0.5 * acc;
}

double total_variation(const MarginalMeasure& a, const MarginalMeasure& b) {
  if (!(a.grid == b.grid)) throw GridMismatchError("total variation requires identical grids");
  double acc = std::abs(a.overflow - b.overflow);
  for (std::size_t i = 0; i < a.weights.size(); ++i) acc += std::abs(a.weights[i] - b.weights[i]);
  return 0.5 * acc;
}

}  // namespace hybridsim::measure
