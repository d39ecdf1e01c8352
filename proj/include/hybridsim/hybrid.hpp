#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hybridsim/flow.hpp"
#include "hybridsim/markov.hpp"

namespace hybridsim::hybrid {

using flow::Vec;

/// One axis of the domain box.
struct Interval {
  double lo;
  double hi;
};

using Box = std::vector<Interval>;

/// Position plus discrete state: the full state of the switched system.
struct HybridState {
  Vec x;
  int state;
};

/// A complete switched system: per-state flows, the switching chain, the
/// switch period h, the domain box and integrator settings.
///
/// Conventions. The chain state in force on [n*h, (n+1)*h) is X_n; at a
/// switch time n*h the recorded state is the post-switch X_n while the
/// position is the flow endpoint. A section at phase t0 of interval n is the
/// point reached by flowing t0 into the interval.
struct HybridSystemSpec {
  flow::VectorFieldFamily fields;
  markov::TransitionMatrix q;
  double h;
  Box box;
  flow::IntegratorSettings integrator;

  HybridSystemSpec(flow::VectorFieldFamily fields, markov::TransitionMatrix q, double h, Box box,
                   flow::IntegratorSettings integrator);
};

struct TrajectorySample {
  double t;
  Vec x;
  int state;
};

/// Sampled realization of the switched system. States change only at
/// multiples of h; identical inputs give bit-identical samples.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  double sample_dt;
  std::uint64_t seed;
};

/// Streams samples at k*sample_dt for k = 0..floor(t_end/sample_dt) without
/// materializing them. Switch draws come from CounterRng(seed, stream) with
/// one counter per switch, so runs with a common key agree draw for draw.
void walk(const HybridSystemSpec& spec, const HybridState& y0, double t_end, double sample_dt, std::uint64_t seed,
          std::uint64_t stream, const std::function<void(double t, std::span<const double> x, int state)>& on_sample);

/// Collects walk() samples into a Trajectory. t_end = 0 yields the single
/// sample at t = 0.
Trajectory simulate(const HybridSystemSpec& spec, const HybridState& y0, double t_end, double sample_dt,
                    std::uint64_t seed, std::uint64_t stream = 0);

struct Outcome {
  HybridState y;
  double prob;
};

/// One step of the embedded discrete-time system at phase t0: from (x, i)
/// the |S| outcomes are (phi_j(t0, phi_i(h - t0, x)), j) with probability
/// P(i,j). Zero-probability outcomes are included; probabilities sum to 1.
std::vector<Outcome> embedded_step(const HybridSystemSpec& spec, const HybridState& y, double t0);

struct SpiderNode {
  HybridState y;
  double prob;
  int parent;  // index into the previous level, -1 at the root
};

/// Exact enumeration of every possible switching branch, level by level.
/// Numerically coincident positions are never merged; zero-probability
/// branches are not expanded.
struct SpiderTree {
  HybridState root;
  int depth;
  std::vector<std::vector<SpiderNode>> levels;

  const std::vector<SpiderNode>& leaves() const { return levels.back(); }
};

/// Breadth-first expansion of embedded_step to the given depth. Throws
/// NodeBudgetExceededError when |S|^depth > max_nodes.
SpiderTree spider(const HybridSystemSpec& spec, const HybridState& y0, double t0, int depth,
                  long long max_nodes = 1'000'000);

/// Exact expectation of f after n embedded steps: sum over the depth-n
/// spider leaves of prob * f(position, state).
double markov_operator(const HybridSystemSpec& spec, const std::function<double(std::span<const double>, int)>& f,
                       const HybridState& y, int n, double t0, long long max_nodes = 1'000'000);

/// Streams sections of one trajectory at times (burn_in + k)*h + t0 for
/// k = 1..n_samples and every phase t0 in `phases` (each in [0,h), ascending).
/// The main trajectory advances interval by interval independently of the
/// phase list, so different phase sets sample the identical realization.
void walk_sections(const HybridSystemSpec& spec, const HybridState& y0, std::span<const double> phases,
                   long burn_in, long n_samples, std::uint64_t seed, std::uint64_t stream,
                   const std::function<void(long k, std::size_t phase_index, std::span<const double> x, int state)>& on_section);

}  // namespace hybridsim::hybrid
