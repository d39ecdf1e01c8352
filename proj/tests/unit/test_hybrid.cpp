#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "hybridsim/errors.hpp"
#include "hybridsim/hybrid.hpp"
#include "hybridsim/rng.hpp"
#include "hybridsim/systems.hpp"

using namespace hybridsim;
using flow::Vec;
using hybrid::HybridState;

namespace {

hybrid::HybridSystemSpec linear(const std::vector<std::vector<double>>& q) {
  return systems::build_linear_1d(markov::TransitionMatrix::validate(q), 1.0);
}

hybrid::HybridSystemSpec linear_q1() { return linear({{0.4, 0.6}, {0.5, 0.5}}); }

hybrid::HybridSystemSpec cstr_default() {
  return systems::build_cstr_2d(
      markov::TransitionMatrix::validate({{0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}}), 1.0);
}

bool same_samples(const hybrid::Trajectory& a, const hybrid::Trajectory& b) {
  if (a.samples.size() != b.samples.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    if (std::memcmp(&a.samples[i].t, &b.samples[i].t, sizeof(double)) != 0) return false;
    if (a.samples[i].state != b.samples[i].state) return false;
    if (a.samples[i].x.size() != b.samples[i].x.size()) return false;
    if (std::memcmp(a.samples[i].x.data(), b.samples[i].x.data(), a.samples[i].x.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("a deterministic chain reduces to a single flow") {
  const auto sys = linear({{1.0, 0.0}, {0.0, 1.0}});
  const auto traj = hybrid::simulate(sys, {{2.0}, 0}, 3.0, 0.25, 99);
  REQUIRE(traj.samples.size() == 13);
  for (const auto& s : traj.samples) {
    CHECK(s.state == 0);
    CHECK(s.x[0] == doctest::Approx(1.0 + std::exp(-s.t)).epsilon(1e-13));
  }
}

TEST_CASE("simulation is deterministic in the seed") {
  const auto sys = linear_q1();
  const HybridState y0{{2.0}, 0};
  const auto a = hybrid::simulate(sys, y0, 25.0, 0.1, 42);
  const auto b = hybrid::simulate(sys, y0, 25.0, 0.1, 42);
  CHECK(same_samples(a, b));

  const auto c = hybrid::simulate(sys, y0, 25.0, 0.1, 43);
  CHECK_FALSE(same_samples(a, c));

  // distinct streams of one seed are distinct trajectories
  const auto d = hybrid::simulate(sys, y0, 25.0, 0.1, 42, 1);
  CHECK_FALSE(same_samples(a, d));
}

TEST_CASE("t_end = 0 yields the single initial sample") {
  const auto sys = linear_q1();
  const auto traj = hybrid::simulate(sys, {{2.0}, 0}, 0.0, 0.1, 1);
  REQUIRE(traj.samples.size() == 1);
  CHECK(traj.samples[0].t == 0.0);
  CHECK(traj.samples[0].x[0] == 2.0);
}

TEST_CASE("states change only at multiples of h") {
  const auto sys = linear_q1();
  const auto traj = hybrid::simulate(sys, {{2.0}, 0}, 50.0, 0.1, 7);
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    CHECK(traj.samples[i].t > traj.samples[i - 1].t);
    if (traj.samples[i].state != traj.samples[i - 1].state) {
      const double t = traj.samples[i].t;
      CHECK(std::abs(t - std::round(t)) <= 1e-9);
    }
  }
}

TEST_CASE("sampling rate does not change the realization") {
  const auto sys = linear_q1();
  const HybridState y0{{2.0}, 0};
  const auto fine = hybrid::simulate(sys, y0, 10.0, 0.1, 99);
  const auto coarse = hybrid::simulate(sys, y0, 10.0, 2.5, 99);
  for (const auto& sample : coarse.samples) {
    const auto match = std::find_if(fine.samples.begin(), fine.samples.end(),
                                    [&](const auto& s) { return std::abs(s.t - sample.t) < 1e-12; });
    REQUIRE(match != fine.samples.end());
    CHECK(match->state == sample.state);
    CHECK(match->x[0] == doctest::Approx(sample.x[0]).epsilon(1e-12));
  }
}

TEST_CASE("trajectories are absorbed into [-1, 1]") {
  const auto sys = linear_q1();
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto traj = hybrid::simulate(sys, {{2.0}, 0}, 60.0, 0.1, seed);
    bool inside = false;
    for (const auto& s : traj.samples) {
      if (std::abs(s.x[0]) <= 1.0) inside = true;
      if (inside) CHECK(std::abs(s.x[0]) <= 1.0);
    }
    CHECK(inside);
  }
}

TEST_CASE("embedded step at phase zero") {
  const auto sys = linear_q1();
  const auto outcomes = hybrid::embedded_step(sys, {{-1.0}, 0}, 0.0);
  REQUIRE(outcomes.size() == 2);
  const double expect = 1.0 - 2.0 * std::exp(-1.0);
  CHECK(outcomes[0].y.x[0] == doctest::Approx(expect).epsilon(1e-14));
  CHECK(outcomes[0].y.state == 0);
  CHECK(outcomes[0].prob == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(outcomes[1].y.state == 1);
  CHECK(outcomes[1].prob == doctest::Approx(0.6).epsilon(1e-15));
  // at t0 = 0 the position is identical across outcomes
  CHECK(outcomes[0].y.x == outcomes[1].y.x);
}

TEST_CASE("embedded step of a deterministic chain") {
  const auto sys = linear({{1.0, 0.0}, {0.0, 1.0}});
  const auto outcomes = hybrid::embedded_step(sys, {{0.4}, 1}, 0.25);
  REQUIRE(outcomes.size() == 2);
  CHECK(outcomes[1].prob == 1.0);
  CHECK(outcomes[0].prob == 0.0);
  CHECK(outcomes[1].y.state == 1);
}

TEST_CASE("embedded step matches the closed form at interior phases") {
  const auto sys = linear_q1();
  const CounterRng rng(55);
  for (int i = 0; i < 50; ++i) {
    const double t0 = rng.uniform(3 * static_cast<std::uint64_t>(i));
    const double x = -2.0 + 4.0 * rng.uniform(3 * static_cast<std::uint64_t>(i) + 1);
    const int s = rng.uniform(3 * static_cast<std::uint64_t>(i) + 2) < 0.5 ? 0 : 1;
    const auto outcomes = hybrid::embedded_step(sys, {{x}, s}, t0);
    const double zi = sys.fields.state_value(s);
    const double mid = zi + (x - zi) * std::exp(-(1.0 - t0));
    for (int j = 0; j < 2; ++j) {
      const double zj = sys.fields.state_value(j);
      const double want = zj + (mid - zj) * std::exp(-t0);
      CHECK(outcomes[static_cast<std::size_t>(j)].y.x[0] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("embedded step probabilities sum to one at interior phases") {
  const auto sys = cstr_default();
  const auto outcomes = hybrid::embedded_step(sys, {{3.5, 0.75}, 1}, 0.37);
  double sum = 0.0;
  for (const auto& o : outcomes) sum += o.prob;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
  CHECK_THROWS_AS(hybrid::embedded_step(sys, {{3.5, 0.75}, 1}, 1.0), DomainError);
}

TEST_CASE("spider enumerates every branch exactly") {
  const auto sys = linear_q1();
  const HybridState y0{{0.0}, 0};

  const auto root_only = hybrid::spider(sys, y0, 0.0, 0);
  CHECK(root_only.levels.size() == 1);
  CHECK(root_only.leaves().size() == 1);
  CHECK(root_only.leaves()[0].prob == 1.0);

  const int depth = 10;
  const auto tree = hybrid::spider(sys, y0, 0.0, depth);
  CHECK(tree.leaves().size() == 1024);

  for (const auto& level : tree.levels) {
    double sum = 0.0;
    for (const auto& node : level) sum += node.prob;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
  for (const auto& leaf : tree.leaves()) CHECK(std::abs(leaf.y.x[0]) <= 1.0);

  // brute-force oracle: enumerate all 2^depth switching sequences directly
  for (long seq = 0; seq < (1L << depth); ++seq) {
    Vec x = y0.x;
    int s = y0.state;
    double prob = 1.0;
    for (int step = 0; step < depth; ++step) {
      const int j = static_cast<int>((seq >> (depth - 1 - step)) & 1);
      x = flow::flow_map(sys.fields, std::move(x), s, 1.0, sys.integrator);
      prob *= sys.q.prob(s, j);
      s = j;
    }
    const auto& leaf = tree.leaves()[static_cast<std::size_t>(seq)];
    CHECK(leaf.y.state == s);
    CHECK(leaf.prob == doctest::Approx(prob).epsilon(1e-12));
    CHECK(leaf.y.x[0] == doctest::Approx(x[0]).epsilon(1e-12));
  }
}

TEST_CASE("spider prunes impossible branches") {
  const auto sys = linear({{1.0, 0.0}, {0.0, 1.0}});
  const auto tree = hybrid::spider(sys, {{2.0}, 0}, 0.0, 10);
  for (const auto& level : tree.levels) {
    CHECK(level.size() == 1);
    CHECK(level[0].prob == 1.0);
    CHECK(level[0].y.state == 0);
  }
}

TEST_CASE("spider node budget") {
  const auto sys = linear_q1();
  CHECK_THROWS_AS(hybrid::spider(sys, {{0.0}, 0}, 0.0, 25, 1'000'000), NodeBudgetExceededError);
  CHECK_THROWS_AS(hybrid::spider(sys, {{0.0}, 0}, 0.0, 80, 1'000'000), NodeBudgetExceededError);
}

TEST_CASE("reactor spider conserves probability") {
  const auto sys = cstr_default();
  const auto tree = hybrid::spider(sys, {{3.5, 0.75}, 1}, 0.0, 5);
  CHECK(tree.leaves().size() == 243);
  double sum = 0.0;
  for (const auto& leaf : tree.leaves()) sum += leaf.prob;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("markov operator basics") {
  const auto sys = linear_q1();
  const HybridState y0{{0.0}, 0};

  const auto one = [](std::span<const double>, int) { return 1.0; };
  for (int n : {0, 1, 3, 6}) CHECK(hybrid::markov_operator(sys, one, y0, n, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  const auto position = [](std::span<const double> x, int) { return x[0]; };
  CHECK(hybrid::markov_operator(sys, position, {{0.7}, 1}, 0, 0.0) == 0.7);
  CHECK(hybrid::markov_operator(sys, position, y0, 1, 0.0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("markov operator agrees with a trajectory ensemble") {
  const auto sys = linear_q1();
  const HybridState y0{{0.0}, 0};
  const int depth = 4;
  const auto position = [](std::span<const double> x, int) { return x[0]; };
  const double exact = hybrid::markov_operator(sys, position, y0, depth, 0.0);

  const long trials = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < trials; ++i) {
    const auto traj = hybrid::simulate(sys, y0, depth * 1.0, depth * 1.0, 2024, static_cast<std::uint64_t>(i));
    const double v = traj.samples.back().x[0];
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / trials;
  const double se = std::sqrt((sumsq / trials - mean * mean) / trials);
  CHECK(std::abs(exact - mean) <= 4.0 * se);
}

TEST_CASE("embedded steps reproduce trajectory sections") {
  const auto sys = linear_q1();
  const auto traj = hybrid::simulate(sys, {{2.0}, 0}, 100.0, 1.0, 321);
  for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k) {
    const auto& cur = traj.samples[k];
    const auto& next = traj.samples[k + 1];
    const auto outcomes = hybrid::embedded_step(sys, {cur.x, cur.state}, 0.0);
    const auto& predicted = outcomes[static_cast<std::size_t>(next.state)];
    CHECK(predicted.y.state == next.state);
    CHECK(std::abs(predicted.y.x[0] - next.x[0]) <= 1e-9);
    CHECK(predicted.prob > 0.0);
  }
}

TEST_CASE("section walker matches integer-time trajectory samples") {
  const auto sys = linear_q1();
  const HybridState y0{{2.0}, 0};
  const auto traj = hybrid::simulate(sys, y0, 5.0, 1.0, 77);

  const double phases[1] = {0.0};
  std::vector<std::pair<double, int>> sections;
  hybrid::walk_sections(sys, y0, phases, 0, 5, 77, 0, [&](long, std::size_t, std::span<const double> x, int s) {
    sections.emplace_back(x[0], s);
  });
  REQUIRE(sections.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    const auto& sample = traj.samples[k + 1];
    CHECK(sections[k].first == sample.x[0]);
    CHECK(sections[k].second == sample.state);
  }
}
