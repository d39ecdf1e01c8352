#include "hybridsim/hybrid.hpp"

#include <cmath>

#include "hybridsim/errors.hpp"
#include "hybridsim/rng.hpp"

namespace hybridsim::hybrid {

namespace {

void check_initial(const HybridSystemSpec& spec, const HybridState& y0) {
  if (y0.state < 0 || y0.state >= spec.q.size()) throw IndexOutOfRangeError("state", y0.state, spec.q.size());
  if (static_cast<int>(y0.x.size()) != spec.fields.dimension())
    throw DomainError("initial point dimension does not match the system");
  for (double v : y0.x)
    if (!std::isfinite(v)) throw NonFiniteStateError("initial point");
}

}  // namespace

HybridSystemSpec::HybridSystemSpec(flow::VectorFieldFamily fields_in, markov::TransitionMatrix q_in, double h_in,
                                   Box box_in, flow::IntegratorSettings integrator_in)
    : fields(std::move(fields_in)), q(std::move(q_in)), h(h_in), box(std::move(box_in)),
      integrator(integrator_in) {
  if (q.size() != fields.state_count())
    throw DomainError("transition matrix size " + std::to_string(q.size()) + " does not match " +
                      std::to_string(fields.state_count()) + " field states");
  if (!(h > 0.0)) throw DomainError("switch period h must be positive");
  if (static_cast<int>(box.size()) != fields.dimension()) throw DomainError("domain box dimension mismatch");
  for (const auto& axis : box)
    if (!(axis.lo < axis.hi)) throw DomainError("domain box axis must have lo < hi");
  if (!(integrator.step_size > 0.0) || integrator.step_size > h)
    throw DomainError("integrator step must lie in (0, h]");
}

void walk(const HybridSystemSpec& spec, const HybridState& y0, double t_end, double sample_dt, std::uint64_t seed,
          std::uint64_t stream, const std::function<void(double, std::span<const double>, int)>& on_sample) {
  check_initial(spec, y0);
  if (t_end < 0.0 || std::isnan(t_end)) throw DomainError("t_end must be nonnegative");
  if (!(sample_dt > 0.0)) throw DomainError("sample_dt must be positive");

  const CounterRng rng(seed, stream);
  const double h = spec.h;
  const double switch_tol = 1e-9 * h;
  const double count = std::floor(t_end / sample_dt + 1e-9);
  if (count > 9e15) throw DomainError("sample count overflows: shrink t_end or grow sample_dt");
  const auto n_samples = static_cast<long>(count);

  Vec x = y0.x;
  int s = y0.state;
  double t = 0.0;
  long interval = 0;
  std::uint64_t draws = 0;

  for (long k = 0; k <= n_samples; ++k) {
    const double target = static_cast<double>(k) * sample_dt;
    while (static_cast<double>(interval + 1) * h <= target + switch_tol) {
      const double ts = static_cast<double>(interval + 1) * h;
      if (ts > t) x = flow_map(spec.fields, std::move(x), s, ts - t, spec.integrator);
      t = ts;
      s = markov::sample_next(spec.q, s, rng.uniform(draws++));
      ++interval;
    }
    if (target > t) {
      x = flow_map(spec.fields, std::move(x), s, target - t, spec.integrator);
      t = target;
    }
    on_sample(target, x, s);
  }
}

Trajectory simulate(const HybridSystemSpec& spec, const HybridState& y0, double t_end, double sample_dt,
                    std::uint64_t seed, std::uint64_t stream) {
  Trajectory traj;
  traj.sample_dt = sample_dt;
  traj.seed = seed;
  if (sample_dt > 0.0 && t_end >= 0.0)
    traj.samples.reserve(static_cast<std::size_t>(t_end / sample_dt) + 2);
  walk(spec, y0, t_end, sample_dt, seed, stream, [&](double t, std::span<const double> x, int state) {
    traj.samples.push_back(TrajectorySample{t, Vec(x.begin(), x.end()), state});
  });
  return traj;
}

std::vector<Outcome> embedded_step(const HybridSystemSpec& spec, const HybridState& y, double t0) {
  check_initial(spec, y);
  if (!(t0 >= 0.0) || t0 >= spec.h) throw DomainError("phase t0 must lie in [0, h)");
  const Vec mid = flow_map(spec.fields, y.x, y.state, spec.h - t0, spec.integrator);
  std::vector<Outcome> out;
  out.reserve(static_cast<std::size_t>(spec.q.size()));
  for (int j = 0; j < spec.q.size(); ++j)
    out.push_back(Outcome{HybridState{flow_map(spec.fields, mid, j, t0, spec.integrator), j}, spec.q.prob(y.state, j)});
  return out;
}

SpiderTree spider(const HybridSystemSpec& spec, const HybridState& y0, double t0, int depth, long long max_nodes) {
  check_initial(spec, y0);
  if (depth < 0) throw DomainError("spider depth must be nonnegative");
  if (max_nodes < 1) throw DomainError("node budget must be positive");

  const int n_states = spec.q.size();
  long long leaves = 1;
  for (int d = 0; d < depth; ++d) {
    if (leaves > max_nodes / n_states) throw NodeBudgetExceededError(n_states, depth, max_nodes);
    leaves *= n_states;
  }
  if (leaves > max_nodes) throw NodeBudgetExceededError(n_states, depth, max_nodes);

  SpiderTree tree;
  tree.root = y0;
  tree.depth = depth;
  tree.levels.resize(static_cast<std::size_t>(depth) + 1);
  tree.levels[0].push_back(SpiderNode{y0, 1.0, -1});
  for (int level = 1; level <= depth; ++level) {
    const auto& prev = tree.levels[static_cast<std::size_t>(level - 1)];
    auto& cur = tree.levels[static_cast<std::size_t>(level)];
    cur.reserve(prev.size() * static_cast<std::size_t>(n_states));
    for (std::size_t p = 0; p < prev.size(); ++p) {
      const auto outcomes = embedded_step(spec, prev[p].y, t0);
      for (const Outcome& o : outcomes) {
        if (o.prob == 0.0) continue;  // impossible branch, carries no mass
        cur.push_back(SpiderNode{o.y, prev[p].prob * o.prob, static_cast<int>(p)});
      }
    }
  }
  return tree;
}

double markov_operator(const HybridSystemSpec& spec, const std::function<double(std::span<const double>, int)>& f,
                       const HybridState& y, int n, double t0, long long max_nodes) {
  const SpiderTree tree = spider(spec, y, t0, n, max_nodes);
  double acc = 0.0;
  for (const SpiderNode& node : tree.leaves()) acc += node.prob * f(node.y.x, node.y.state);
  return acc;
}

void walk_sections(const HybridSystemSpec& spec, const HybridState& y0, std::span<const double> phases, long burn_in,
                   long n_samples, std::uint64_t seed, std::uint64_t stream,
                   const std::function<void(long, std::size_t, std::span<const double>, int)>& on_section) {
  check_initial(spec, y0);
  if (burn_in < 0) throw DomainError("burn-in must be nonnegative");
  if (n_samples < 1) throw DomainError("need at least one sample");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    if (!(phases[i] >= 0.0) || phases[i] >= spec.h) throw DomainError("phase t0 must lie in [0, h)");
    if (i > 0 && phases[i] < phases[i - 1]) throw DomainError("phases must be ascending");
  }

  const CounterRng rng(seed, stream);
  Vec x = y0.x;
  int s = y0.state;
  std::uint64_t draws = 0;
  const long last = burn_in + n_samples;

  // Interval m starts at time m*h; x and s are its start point and state.
  for (long m = 0;; ++m) {
    if (m > burn_in) {
      Vec xc = x;
      double prev = 0.0;
      for (std::size_t pi = 0; pi < phases.size(); ++pi) {
        if (phases[pi] > prev) {
          xc = flow_map(spec.fields, std::move(xc), s, phases[pi] - prev, spec.integrator);
          prev = phases[pi];
        }
        on_section(m - burn_in, pi, xc, s);
      }
    }
    if (m == last) break;
    x = flow_map(spec.fields, std::move(x), s, spec.h, spec.integrator);
    s = markov::sample_next(spec.q, s, rng.uniform(draws++));
  }
}

}  // namespace hybridsim::hybrid
