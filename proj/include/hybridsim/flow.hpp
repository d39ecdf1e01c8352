#pragma once

#include <functional>
#include <span>
#include <vector>

namespace hybridsim::flow {

using Vec = std::vector<double>;

/// Evaluates dx/dt at (x, state).
using FieldFn = std::function<void(std::span<const double> x, int state, std::span<double> dxdt)>;

/// Exact flow x -> phi_state(duration, x), when known in closed form.
using AnalyticFlowFn = std::function<void(std::span<const double> x, int state, double duration, std::span<double> out)>;

/// A family of autonomous vector fields indexed by a finite state set, with
/// an optional closed-form flow. state_values carries the per-state parameter
/// (the value the switching signal takes in that state).
class VectorFieldFamily {
 public:
  VectorFieldFamily(int dimension, std::vector<double> state_values, FieldFn field, AnalyticFlowFn analytic = nullptr);

  int dimension() const { return dimension_; }
  int state_count() const { return static_cast<int>(state_values_.size()); }
  double state_value(int s) const;
  void eval(std::span<const double> x, int s, std::span<double> dxdt) const;

  bool has_analytic() const { return static_cast<bool>(analytic_); }
  void eval_analytic(std::span<const double> x, int s, double duration, std::span<double> out) const;

  /// Copy with the closed-form flow removed; integration then always uses RK4.
  VectorFieldFamily numeric_only() const;

 private:
  int dimension_;
  std::vector<double> state_values_;
  FieldFn field_;
  AnalyticFlowFn analytic_;
};

/// Fixed-step integrator settings. The classic fourth-order Runge-Kutta
/// scheme is used; the final partial step is shortened to land exactly on the
/// requested duration.
struct IntegratorSettings {
  double step_size;
};

/// phi_s(duration, x). Uses the closed-form flow when the family has one,
/// otherwise RK4. Throws NonFiniteStateError on NaN/Inf (blow-up or a bad
/// field), DomainError on negative duration.
Vec flow_map(const VectorFieldFamily& fields, Vec x, int s, double duration, const IntegratorSettings& settings);

/// Composed flow: full switching intervals of length h under states[0],
/// states[1], ... then the remainder under the next state. A duration that is
/// an exact multiple of h consumes exactly t/h states.
Vec hybrid_flow(const VectorFieldFamily& fields, Vec x0, std::span<const int> states, double h, double t,
                const IntegratorSettings& settings);

/// Central finite-difference Jacobian of the field at x (relative step 1e-6).
std::vector<Vec> numerical_jacobian(const VectorFieldFamily& fields, int s, const Vec& x);

/// Newton iteration from each seed; returns roots with ||f|| < tol,
/// deduplicated within 1e-6. Seeds that fail to converge are dropped.
std::vector<Vec> find_fixed_points(const VectorFieldFamily& fields, int s, const std::vector<Vec>& seeds, double tol);

}  // namespace hybridsim::flow
