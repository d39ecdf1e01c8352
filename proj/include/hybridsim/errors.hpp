#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hybridsim {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad inputs: configuration, schema, indices, budgets. Maps to CLI exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Numerical failures at run time. Maps to CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

class NonSquareError : public UsageError {
 public:
  NonSquareError(std::size_t rows, std::size_t cols)
      : UsageError("transition matrix is not square: " + std::to_string(rows) + " rows, row of length " +
                   std::to_string(cols)),
        rows(rows),
        cols(cols) {}
  std::size_t rows;
  std::size_t cols;
};

class NegativeEntryError : public UsageError {
 public:
  NegativeEntryError(int row, int col, double value)
      : UsageError("negative transition probability at (" + std::to_string(row) + "," + std::to_string(col) +
                   "): " + std::to_string(value)),
        row(row),
        col(col),
        value(value) {}
  int row;
  int col;
  double value;
};

class RowSumViolationError : public UsageError {
 public:
  RowSumViolationError(int row, double sum)
      : UsageError("row " + std::to_string(row) + " of the transition matrix sums to " + std::to_string(sum) +
                   ", expected 1"),
        row(row),
        sum(sum) {}
  int row;
  double sum;
};

class IndexOutOfRangeError : public UsageError {
 public:
  IndexOutOfRangeError(const std::string& what, long index, long size)
      : UsageError(what + " index " + std::to_string(index) + " out of range [0," + std::to_string(size) + ")"),
        index(index),
        size(size) {}
  long index;
  long size;
};

class NoConvergenceError : public NumericError {
 public:
  explicit NoConvergenceError(long iterations)
      : NumericError("iteration did not converge after " + std::to_string(iterations) + " steps"),
        iterations(iterations) {}
  long iterations;
};

class NonFiniteStateError : public NumericError {
 public:
  explicit NonFiniteStateError(const std::string& context)
      : NumericError("non-finite state encountered: " + context) {}
};

class SequenceTooShortError : public UsageError {
 public:
  SequenceTooShortError(std::size_t have, std::size_t need)
      : UsageError("state sequence of length " + std::to_string(have) + " too short, need " + std::to_string(need)),
        have(have),
        need(need) {}
  std::size_t have;
  std::size_t need;
};

class NodeBudgetExceededError : public UsageError {
 public:
  NodeBudgetExceededError(int states, int depth, long long budget)
      : UsageError("spider tree with " + std::to_string(states) + "^" + std::to_string(depth) +
                   " leaves exceeds the node budget of " + std::to_string(budget)),
        states(states),
        depth(depth),
        budget(budget) {}
  int states;
  int depth;
  long long budget;
};

class GridMismatchError : public UsageError {
 public:
  using UsageError::UsageError;
};

class DomainError : public UsageError {
 public:
  using UsageError::UsageError;
};

class UnknownSystemError : public UsageError {
 public:
  UnknownSystemError(const std::string& name, const std::vector<std::string>& available)
      : UsageError(build_message(name, available)), name(name), available(available) {}
  std::string name;
  std::vector<std::string> available;

 private:
  static std::string build_message(const std::string& name, const std::vector<std::string>& available) {
    std::string msg = "unknown system \"" + name + "\"; available:";
    for (const auto& a : available) msg += " " + a;
    return msg;
  }
};

class SchemaViolationError : public UsageError {
 public:
  SchemaViolationError(const std::string& path, const std::string& detail)
      : UsageError("config field \"" + path + "\": " + detail), path(path) {}
  std::string path;
};

}  // namespace hybridsim
