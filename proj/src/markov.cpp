#include "hybridsim/markov.hpp"

#include <cmath>

#include "hybridsim/errors.hpp"

namespace hybridsim::markov {

TransitionMatrix TransitionMatrix::validate(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  if (n == 0) throw NonSquareError(0, 0);
  for (const auto& row : rows)
    if (row.size() != n) throw NonSquareError(n, row.size());

  std::vector<double> entries;
  entries.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double p = rows[i][j];
      if (p < 0.0 || std::isnan(p)) throw NegativeEntryError(static_cast<int>(i), static_cast<int>(j), p);
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw RowSumViolationError(static_cast<int>(i), sum);
    for (std::size_t j = 0; j < n; ++j) entries.push_back(rows[i][j] / sum);
  }
  return TransitionMatrix(static_cast<int>(n), std::move(entries));
}

StateDistribution StateDistribution::validate(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0 || std::isnan(w)) throw DomainError("state distribution has a negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw DomainError("state distribution weights sum to " + std::to_string(sum));
  return StateDistribution{std::move(weights)};
}

StateDistribution StateDistribution::uniform(int n) {
  if (n < 1) throw DomainError("state count must be positive");
  return StateDistribution{std::vector<double>(static_cast<std::size_t>(n), 1.0 / n)};
}

StateDistribution StateDistribution::point(int n, int i) {
  if (i < 0 || i >= n) throw IndexOutOfRangeError("state", i, n);
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  w[static_cast<std::size_t>(i)] = 1.0;
  return StateDistribution{std::move(w)};
}

int sample_next(const TransitionMatrix& q, int i, double u) {
  const int n = q.size();
  if (i < 0 || i >= n) throw IndexOutOfRangeError("state", i, n);
  double cum = 0.0;
  for (int j = 0; j < n; ++j) {
    cum += q.prob(i, j);
    if (cum > u) return j;
  }
  return n - 1;  // u at the top of a row whose cumulative sum rounded below 1
}

StateDistribution n_step_distribution(const TransitionMatrix& q, const StateDistribution& init, long n) {
  if (n < 0) throw DomainError("step count must be nonnegative");
  if (init.size() != q.size()) throw IndexOutOfRangeError("distribution size", init.size(), q.size());
  const int m = q.size();
  std::vector<double> v = init.weights;
  std::vector<double> w(static_cast<std::size_t>(m));
  for (long step = 0; step < n; ++step) {
    for (int j = 0; j < m; ++j) w[static_cast<std::size_t>(j)] = 0.0;
    for (int i = 0; i < m; ++i) {
      const double vi = v[static_cast<std::size_t>(i)];
      if (vi == 0.0) continue;
      for (int j = 0; j < m; ++j) w[static_cast<std::size_t>(j)] += vi * q.prob(i, j);
    }
    v.swap(w);
  }
  return StateDistribution{std::move(v)};
}

StateDistribution stationary_distribution(const TransitionMatrix& q) {
  const int m = q.size();
  constexpr long kMaxIters = 1'000'000;
  std::vector<double> v(static_cast<std::size_t>(m), 1.0 / m);
  std::vector<double> w(static_cast<std::size_t>(m));
  double change = 0.0;
  for (long it = 0; it < kMaxIters; ++it) {
    for (int j = 0; j < m; ++j) w[static_cast<std::size_t>(j)] = 0.5 * v[static_cast<std::size_t>(j)];
    for (int i = 0; i < m; ++i) {
      const double vi = 0.5 * v[static_cast<std::size_t>(i)];
      for (int j = 0; j < m; ++j) w[static_cast<std::size_t>(j)] += vi * q.prob(i, j);
    }
    change = 0.0;
    for (int j = 0; j < m; ++j) change += std::abs(w[static_cast<std::size_t>(j)] - v[static_cast<std::size_t>(j)]);
    v.swap(w);
    if (change <= 1e-15) break;
  }
  if (change > 1e-13) throw NoConvergenceError(kMaxIters);
  double sum = 0.0;
  for (double x : v) sum += x;
  for (double& x : v) x /= sum;
  return StateDistribution{std::move(v)};
}

}  // namespace hybridsim::markov
