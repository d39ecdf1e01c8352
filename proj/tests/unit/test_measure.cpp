#include <doctest.h>

#include <cmath>
#include <vector>

#include "hybridsim/errors.hpp"
#include "hybridsim/measure.hpp"
#include "hybridsim/systems.hpp"

using namespace hybridsim;
using flow::Vec;
using hybrid::HybridState;
using measure::GridMeasure;
using measure::GridSpec;

namespace {

hybrid::HybridSystemSpec linear(const std::vector<std::vector<double>>& q) {
  return systems::build_linear_1d(markov::TransitionMatrix::validate(q), 1.0);
}

hybrid::HybridSystemSpec linear_q1() { return linear({{0.4, 0.6}, {0.5, 0.5}}); }

GridSpec grid200() { return GridSpec{{{-3.0, 3.0}}, {200}}; }

// smooth test measure: a triangular profile over [-2, 2] on every sheet
GridMeasure tent_measure(const GridSpec& grid, int states, double phase) {
  GridMeasure mu(grid, states, phase);
  double total = 0.0;
  for (long c = 0; c < grid.cell_count(); ++c) {
    const double x = grid.center(c)[0];
    if (x < -2.0 || x > 2.0) continue;
    const double density = 1.0 - 0.5 * std::abs(x);
    for (int s = 0; s < states; ++s) mu.at(s, c) = density;
    total += states * density;
  }
  for (double& w : mu.weights) w /= total;
  return mu;
}

}  // namespace

TEST_CASE("grid cell bookkeeping") {
  const auto grid = grid200();
  CHECK(grid.cell_count() == 200);
  CHECK(grid.width(0) == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(grid.locate(Vec{-3.0}) == 0);
  CHECK(grid.locate(Vec{3.0}) == 199);  // top edge belongs to the last cell
  CHECK(grid.locate(Vec{3.1}) == -1);
  CHECK(grid.locate(Vec{-3.0001}) == -1);
  const long c = grid.locate(Vec{1.0});
  CHECK(grid.center(c)[0] == doctest::Approx(1.005).epsilon(1e-12));

  const GridSpec g2{{{0.0, 8.0}, {0.0, 1.2}}, {100, 100}};
  CHECK(g2.cell_count() == 10000);
  const long cell = g2.locate(Vec{3.5, 0.75});
  const auto center = g2.center(cell);
  CHECK(std::abs(center[0] - 3.5) <= g2.width(0));
  CHECK(std::abs(center[1] - 0.75) <= g2.width(1));
}

TEST_CASE("empirical measure of a deterministic attractor") {
  const auto sys = linear({{1.0, 0.0}, {0.0, 1.0}});
  const auto mu = measure::empirical_measure(sys, {{2.0}, 0}, 0.0, 60, 1000, grid200(), 5);
  mu.check_mass();
  const long sink = mu.grid.locate(Vec{1.0});
  CHECK(mu.at(0, sink) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mu.sheet_mass(1) == 0.0);
}

TEST_CASE("empirical sheet masses follow the stationary chain law") {
  const auto sys = linear_q1();
  const auto mu = measure::empirical_measure(sys, {{2.0}, 0}, 0.0, 1000, 1000000, grid200(), 11);
  mu.check_mass();
  CHECK(std::abs(mu.sheet_mass(0) - 5.0 / 11.0) <= 0.01);
  CHECK(std::abs(mu.sheet_mass(1) - 6.0 / 11.0) <= 0.01);
  CHECK(mu.overflow == 0.0);
}

TEST_CASE("integer-time sections avoid the central gap") {
  const auto sys = linear_q1();
  const auto mu = measure::empirical_measure(sys, {{2.0}, 0}, 0.0, 1000, 100000, grid200(), 3);
  const double edge = 1.0 - 2.0 * std::exp(-1.0);
  const double w = mu.grid.width(0);
  for (long c = 0; c < mu.grid.cell_count(); ++c) {
    const double lo = -3.0 + c * w;
    const double hi = lo + w;
    if (lo >= -edge + w && hi <= edge - w) {
      CHECK(mu.at(0, c) == 0.0);
      CHECK(mu.at(1, c) == 0.0);
    }
  }
}

TEST_CASE("a single sample gives a single-atom measure") {
  const auto sys = linear_q1();
  const auto mu = measure::empirical_measure(sys, {{2.0}, 0}, 0.0, 5, 1, grid200(), 19);
  mu.check_mass();
  long populated = 0;
  for (double w : mu.weights)
    if (w != 0.0) ++populated;
  CHECK(populated == 1);
  CHECK(mu.total_mass() == 1.0);
}

TEST_CASE("marginalization sums the sheets") {
  const auto grid = grid200();
  GridMeasure one_sheet(grid, 2, 0.0);
  one_sheet.at(0, 10) = 0.7;
  one_sheet.at(0, 11) = 0.3;
  const auto m1 = measure::marginalize(one_sheet);
  CHECK(m1.weights[10] == 0.7);
  CHECK(m1.weights[11] == 0.3);
  CHECK(m1.total_mass() == doctest::Approx(1.0).epsilon(1e-15));

  const auto uniform = tent_measure(grid, 2, 0.0);
  const auto m2 = measure::marginalize(uniform);
  CHECK(m2.total_mass() == doctest::Approx(uniform.total_mass()).epsilon(1e-15));
  CHECK(m2.weights[static_cast<std::size_t>(grid.locate(Vec{0.0}))] ==
        doctest::Approx(2.0 * uniform.at(0, grid.locate(Vec{0.0}))).epsilon(1e-15));
}

TEST_CASE("empirical marginal is bimodal with an empty gap") {
  const auto sys = linear_q1();
  const auto mu = measure::empirical_measure(sys, {{2.0}, 0}, 0.0, 1000, 200000, grid200(), 17);
  const auto marginal = measure::marginalize(mu);
  const double w = mu.grid.width(0);
  double left = 0.0, right = 0.0, gap = 0.0;
  for (long c = 0; c < mu.grid.cell_count(); ++c) {
    const double x = mu.grid.center(c)[0];
    const double v = marginal.weights[static_cast<std::size_t>(c)];
    CHECK((x >= -1.0 - w && x <= 1.0 + w ? true : v == 0.0));
    if (x < -0.264 + w && x > -1.0 - w) left += v;
    if (x > 0.264 - w && x < 1.0 + w) right += v;
    if (std::abs(x) < 0.264 - w) gap += v;
  }
  CHECK(left > 0.3);
  CHECK(right > 0.3);
  CHECK(gap == 0.0);
}

TEST_CASE("pushforward identity and atoms") {
  const auto sys = linear_q1();
  const auto grid = grid200();

  GridMeasure atom(grid, 2, 0.0);
  const long cell = grid.locate(Vec{0.5});
  atom.at(0, cell) = 1.0;

  const auto same = measure::pushforward(sys, atom, 0.0);
  CHECK(same.weights == atom.weights);
  CHECK(same.overflow == atom.overflow);

  // a point mass maps onto the embedded outcomes of its cell center
  const auto pushed = measure::pushforward(sys, atom, sys.h);
  pushed.check_mass();
  const auto outcomes = hybrid::embedded_step(sys, {grid.center(cell), 0}, 0.0);
  for (const auto& o : outcomes) {
    const long target = grid.locate(o.y.x);
    CHECK(pushed.at(o.y.state, target) == doctest::Approx(o.prob).epsilon(1e-14));
  }

  // same at an interior phase, where the outcome positions differ per state
  GridMeasure atom25(grid, 2, 0.25);
  atom25.at(1, cell) = 1.0;
  const auto pushed25 = measure::pushforward(sys, atom25, sys.h);
  CHECK(pushed25.phase == 0.25);
  const auto outcomes25 = hybrid::embedded_step(sys, {grid.center(cell), 1}, 0.25);
  CHECK(outcomes25[0].y.x[0] != outcomes25[1].y.x[0]);
  for (const auto& o : outcomes25) {
    const long target = grid.locate(o.y.x);
    CHECK(pushed25.at(o.y.state, target) == doctest::Approx(o.prob).epsilon(1e-14));
  }
}

TEST_CASE("pushforward conserves mass") {
  const auto sys = linear_q1();
  const auto mu = measure::empirical_measure(sys, {{2.0}, 0}, 0.25, 200, 20000, grid200(), 23);
  for (double t : {1.0, 3.0, 0.4, 2.5, 10.0}) {
    const auto pushed = measure::pushforward(sys, mu, t, {4, 1});
    CHECK(std::abs(pushed.total_mass() - 1.0) <= 1e-9);
    const auto marginal = measure::marginalize(pushed);
    CHECK(std::abs(marginal.total_mass() - 1.0) <= 1e-9);
  }
}

TEST_CASE("pushforward semigroup over whole periods is exact") {
  const auto sys = linear_q1();
  const auto mu = measure::empirical_measure(sys, {{2.0}, 0}, 0.0, 500, 50000, grid200(), 29);
  const auto two_hops = measure::pushforward(sys, measure::pushforward(sys, mu, 1.0), 1.0);
  const auto direct = measure::pushforward(sys, mu, 2.0);
  CHECK(measure::total_variation(two_hops, direct) <= 1e-6);
}

TEST_CASE("pushforward semigroup for fractional times stays within grid diffusion") {
  const auto sys = linear_q1();
  const auto grid = grid200();
  const auto mu = tent_measure(grid, 2, 0.0);
  // the composed route resamples the intermediate histogram; its error falls
  // off like 1/points_per_axis, so 16 points leave margin under 0.02
  const measure::TransferOptions opts{16, 1};

  const auto hop = measure::pushforward(sys, measure::pushforward(sys, mu, 1.0 / 3.0, opts), 1.0 / 3.0, opts);
  const auto direct = measure::pushforward(sys, mu, 2.0 / 3.0, opts);
  CHECK(hop.phase == doctest::Approx(direct.phase).epsilon(1e-12));
  CHECK(measure::total_variation(hop, direct) <= 0.02);

  // composition across the switch boundary
  const auto hop2 = measure::pushforward(sys, measure::pushforward(sys, mu, 0.5, opts), 0.75, opts);
  const auto direct2 = measure::pushforward(sys, mu, 1.25, opts);
  CHECK(hop2.phase == doctest::Approx(direct2.phase).epsilon(1e-12));
  CHECK(measure::total_variation(hop2, direct2) <= 0.02);
}

TEST_CASE("pushforward across the switch boundary conserves mass and phase") {
  const auto sys = linear_q1();
  const auto mu = measure::empirical_measure(sys, {{2.0}, 0}, 2.0 / 3.0, 200, 20000, grid200(), 31);
  CHECK(mu.phase == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  const auto pushed = measure::pushforward(sys, mu, 2.0 / 3.0, {4, 1});
  CHECK(pushed.phase == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(pushed.total_mass() - 1.0) <= 1e-9);
}

TEST_CASE("mass leaving the box lands in the overflow bin") {
  flow::VectorFieldFamily expanding(1, {0.0},
                                    [](std::span<const double> x, int, std::span<double> dxdt) { dxdt[0] = x[0]; });
  const hybrid::HybridSystemSpec sys(std::move(expanding), markov::TransitionMatrix::validate({{1.0}}), 1.0,
                                     {{-1.0, 1.0}}, flow::IntegratorSettings{0.01});
  const GridSpec grid{{{-1.0, 1.0}}, {50}};
  GridMeasure atom(grid, 1, 0.0);
  atom.at(0, grid.locate(Vec{0.9})) = 1.0;
  const auto pushed = measure::pushforward(sys, atom, 1.0);
  CHECK(pushed.overflow == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(pushed.total_mass() - 1.0) <= 1e-12);
}

TEST_CASE("built-in systems keep overflow negligible inside their absorbing regions") {
  const auto lin = linear_q1();
  const auto mu = measure::empirical_measure(lin, {{0.5}, 0}, 0.0, 100, 20000, grid200(), 37);
  CHECK(mu.overflow == 0.0);
  CHECK(measure::pushforward(lin, mu, 3.0, {4, 1}).overflow <= 1e-6);

  const auto reactor = systems::build_cstr_2d(
      markov::TransitionMatrix::validate({{0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}}), 1.0);
  const GridSpec grid2{{{0.0, 8.0}, {0.0, 1.2}}, {50, 50}};
  const auto mu2 = measure::empirical_measure(reactor, {{0.67, 0.09}, 1}, 0.0, 20, 500, grid2, 37);
  CHECK(mu2.overflow == 0.0);
  CHECK(measure::pushforward(reactor, mu2, reactor.h).overflow <= 1e-6);
}

TEST_CASE("total variation distances") {
  const auto grid = grid200();
  GridMeasure a(grid, 2, 0.0), b(grid, 2, 0.0);
  a.at(0, 5) = 1.0;
  b.at(0, 5) = 1.0;
  CHECK(measure::total_variation(a, b) == 0.0);

  GridMeasure c(grid, 2, 0.0);
  c.at(1, 100) = 1.0;
  CHECK(measure::total_variation(a, c) == 1.0);

  GridMeasure d(grid, 2, 0.0);
  d.at(0, 5) = 0.5;
  d.at(0, 6) = 0.5;
  CHECK(measure::total_variation(a, d) == 0.5);

  const GridSpec other{{{-3.0, 3.0}}, {100}};
  GridMeasure e(other, 2, 0.0);
  e.at(0, 5) = 1.0;
  CHECK_THROWS_AS(measure::total_variation(a, e), GridMismatchError);
}

TEST_CASE("total variation is a metric bounded by one") {
  const auto sys = linear_q1();
  const auto grid = grid200();
  const auto a = measure::empirical_measure(sys, {{2.0}, 0}, 0.0, 100, 3000, grid, 61);
  const auto b = measure::empirical_measure(sys, {{2.0}, 0}, 0.0, 100, 3000, grid, 62);
  const auto c = measure::empirical_measure(sys, {{-2.0}, 1}, 0.5, 100, 3000, grid, 63);
  const double ab = measure::total_variation(a, b);
  const double bc = measure::total_variation(b, c);
  const double ac = measure::total_variation(a, c);
  CHECK(ab == measure::total_variation(b, a));
  CHECK(ab >= 0.0);
  CHECK(ac <= 1.0);
  CHECK(ac <= ab + bc + 1e-15);
  CHECK(measure::total_variation(a, a) == 0.0);
}

TEST_CASE("multi-point transfer stratifies reactor cells") {
  const auto sys = systems::build_cstr_2d(
      markov::TransitionMatrix::validate({{0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}}), 1.0);
  const GridSpec grid{{{0.0, 8.0}, {0.0, 1.2}}, {40, 40}};
  GridMeasure atom(grid, 3, 0.0);
  const long cell = grid.locate(Vec{3.5, 0.75});
  atom.at(1, cell) = 1.0;

  const auto pushed = measure::pushforward(sys, atom, sys.h, {2, 1});
  CHECK(std::abs(pushed.total_mass() - 1.0) <= 1e-12);

  // oracle: push the four stratified representatives by hand
  GridMeasure want(grid, 3, 0.0);
  const auto coords = grid.coords(cell);
  for (int ra = 0; ra < 2; ++ra)
    for (int rb = 0; rb < 2; ++rb) {
      const Vec p{grid.box[0].lo + (coords[0] + (ra + 0.5) / 2.0) * grid.width(0),
                  grid.box[1].lo + (coords[1] + (rb + 0.5) / 2.0) * grid.width(1)};
      const auto outcomes = hybrid::embedded_step(sys, {p, 1}, 0.0);
      for (const auto& o : outcomes) {
        const long target = grid.locate(o.y.x);
        REQUIRE(target >= 0);
        want.at(o.y.state, target) += 0.25 * o.prob;
      }
    }
  CHECK(measure::total_variation(pushed, want) <= 1e-12);
}

TEST_CASE("phase family shares one trajectory pass") {
  const auto sys = linear_q1();
  const HybridState y0{{2.0}, 0};

  const double one_phase[1] = {0.0};
  const auto family1 = measure::phase_family(sys, y0, one_phase, 100, 5000, grid200(), 41);
  const auto direct = measure::empirical_measure(sys, y0, 0.0, 100, 5000, grid200(), 41);
  CHECK(family1.size() == 1);
  CHECK(family1[0].weights == direct.weights);
  CHECK(family1[0].overflow == direct.overflow);

  std::vector<double> phases;
  for (int i = 0; i < 6; ++i) phases.push_back(i / 6.0);
  const auto family = measure::phase_family(sys, y0, phases, 200, 20000, grid200(), 41);
  REQUIRE(family.size() == 6);
  const double w = family[0].grid.width(0);
  for (const auto& mu : family) {
    mu.check_mass();
    for (int s = 0; s < mu.states; ++s)
      for (long c = 0; c < mu.grid.cell_count(); ++c)
        if (mu.at(s, c) > 0.0) CHECK(std::abs(mu.grid.center(c)[0]) <= 1.0 + w);
  }

  CHECK_THROWS_AS(measure::phase_family(sys, y0, std::vector<double>{1.5}, 10, 10, grid200(), 1), DomainError);
}

TEST_CASE("pushing one phase forward lands near the next phase") {
  const auto sys = linear_q1();
  std::vector<double> phases{0.0, 1.0 / 6.0};
  const auto family = measure::phase_family(sys, {{2.0}, 0}, phases, 500, 200000, grid200(), 47);
  const auto pushed = measure::pushforward(sys, family[0], 1.0 / 6.0, {8, 1});
  CHECK(pushed.phase == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  // the grid transfer of a singular section measure carries O(1) aliasing;
  // at 200 bins and 8 points per cell the distance sits near 0.1
  CHECK(measure::total_variation(pushed, family[1]) <= 0.15);
}
