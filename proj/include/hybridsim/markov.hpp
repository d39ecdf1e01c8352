#pragma once

#include <span>
#include <vector>

namespace hybridsim::markov {

/// Row-stochastic transition matrix over a finite state set. Entry (i,j) is
/// the probability of switching from state i to state j. Distributions are
/// row vectors throughout: one step is dist * Q.
class TransitionMatrix {
 public:
  /// Checks shape, nonnegativity and row sums (|sum - 1| <= 1e-9), then
  /// renormalizes each row exactly. Throws NonSquareError, NegativeEntryError
  /// or RowSumViolationError.
  static TransitionMatrix validate(const std::vector<std::vector<double>>& rows);

  int size() const { return size_; }
  double prob(int i, int j) const { return entries_[static_cast<std::size_t>(i) * size_ + j]; }
  std::span<const double> row(int i) const { return {entries_.data() + static_cast<std::size_t>(i) * size_, static_cast<std::size_t>(size_)}; }

 private:
  TransitionMatrix(int size, std::vector<double> entries) : size_(size), entries_(std::move(entries)) {}
  int size_;
  std::vector<double> entries_;
};

/// Probability vector over the state set.
struct StateDistribution {
  std::vector<double> weights;

  /// Enforces nonnegativity and sum 1 within 1e-12.
  static StateDistribution validate(std::vector<double> weights);
  static StateDistribution uniform(int n);
  static StateDistribution point(int n, int i);

  int size() const { return static_cast<int>(weights.size()); }
};

/// Inverse-CDF draw: smallest j with P(i,0)+...+P(i,j) > u. u = 0 is always
/// valid; ties break toward the smaller index.
int sample_next(const TransitionMatrix& q, int i, double u);

/// init * Q^n (row-vector convention).
StateDistribution n_step_distribution(const TransitionMatrix& q, const StateDistribution& init, long n);

/// Stationary distribution via averaged power iteration from the uniform
/// start: v <- (v + v*Q)/2. The averaging damps period-2 cycles so the
/// iteration converges geometrically for every valid Q, including periodic
/// and reducible chains. Throws NoConvergenceError if the L1 change still
/// exceeds 1e-13 after 1e6 iterations.
StateDistribution stationary_distribution(const TransitionMatrix& q);

}  // namespace hybridsim::markov
