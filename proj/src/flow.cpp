#include "hybridsim/flow.hpp"

#include <cmath>
#include <cstddef>

#include "hybridsim/errors.hpp"

namespace hybridsim::flow {

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// One classic RK4 step of size dt, in place.
void rk4_step(const VectorFieldFamily& fields, int s, double dt, Vec& x, Vec& k1, Vec& k2, Vec& k3, Vec& k4,
              Vec& xt) {
  const std::size_t d = x.size();
  fields.eval(x, s, k1);
  for (std::size_t i = 0; i < d; ++i) xt[i] = x[i] + 0.5 * dt * k1[i];
  fields.eval(xt, s, k2);
  for (std::size_t i = 0; i < d; ++i) xt[i] = x[i] + 0.5 * dt * k2[i];
  fields.eval(xt, s, k3);
  for (std::size_t i = 0; i < d; ++i) xt[i] = x[i] + dt * k3[i];
  fields.eval(xt, s, k4);
  for (std::size_t i = 0; i < d; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
}

}  // namespace

VectorFieldFamily::VectorFieldFamily(int dimension, std::vector<double> state_values, FieldFn field,
                                     AnalyticFlowFn analytic)
    : dimension_(dimension), state_values_(std::move(state_values)), field_(std::move(field)),
      analytic_(std::move(analytic)) {
  if (dimension_ < 1) throw DomainError("field dimension must be positive");
  if (state_values_.empty()) throw DomainError("field family needs at least one state");
  if (!field_) throw DomainError("field evaluator must be set");
}

double VectorFieldFamily::state_value(int s) const {
  if (s < 0 || s >= state_count()) throw IndexOutOfRangeError("state", s, state_count());
  return state_values_[static_cast<std::size_t>(s)];
}

void VectorFieldFamily::eval(std::span<const double> x, int s, std::span<double> dxdt) const {
  if (s < 0 || s >= state_count()) throw IndexOutOfRangeError("state", s, state_count());
  field_(x, s, dxdt);
}

void VectorFieldFamily::eval_analytic(std::span<const double> x, int s, double duration, std::span<double> out) const {
  if (s < 0 || s >= state_count()) throw IndexOutOfRangeError("state", s, state_count());
  analytic_(x, s, duration, out);
}

VectorFieldFamily VectorFieldFamily::numeric_only() const {
  return VectorFieldFamily(dimension_, state_values_, field_, nullptr);
}

Vec flow_map(const VectorFieldFamily& fields, Vec x, int s, double duration, const IntegratorSettings& settings) {
  if (duration < 0.0 || std::isnan(duration)) throw DomainError("flow duration must be nonnegative");
  if (static_cast<int>(x.size()) != fields.dimension())
    throw DomainError("point dimension does not match the field family");
  if (!all_finite(x)) throw NonFiniteStateError("initial point");
  if (duration == 0.0) {
    if (s < 0 || s >= fields.state_count()) throw IndexOutOfRangeError("state", s, fields.state_count());
    return x;
  }

  if (fields.has_analytic()) {
    Vec out(x.size());
    fields.eval_analytic(x, s, duration, out);
    if (!all_finite(out)) throw NonFiniteStateError("closed-form flow");
    return out;
  }

  const double step = settings.step_size;
  if (!(step > 0.0)) throw DomainError("integrator step size must be positive");
  const double steps = std::floor(duration / step + 1e-9);
  if (steps > 9e15) throw DomainError("integration step count overflows: grow the step size");
  const auto nfull = static_cast<long>(steps);
  const double rem = duration - static_cast<double>(nfull) * step;

  Vec k1(x.size()), k2(x.size()), k3(x.size()), k4(x.size()), xt(x.size());
  for (long i = 0; i < nfull; ++i) {
    rk4_step(fields, s, step, x, k1, k2, k3, k4, xt);
    if (!all_finite(x)) throw NonFiniteStateError("RK4 integration");
  }
  if (rem > step * 1e-12) {
    rk4_step(fields, s, rem, x, k1, k2, k3, k4, xt);
    if (!all_finite(x)) throw NonFiniteStateError("RK4 integration");
  }
  return x;
}

Vec hybrid_flow(const VectorFieldFamily& fields, Vec x0, std::span<const int> states, double h, double t,
                const IntegratorSettings& settings) {
  if (!(h > 0.0)) throw DomainError("switch period h must be positive");
  if (t < 0.0 || std::isnan(t)) throw DomainError("time must be nonnegative");
  auto nfull = static_cast<long>(std::floor(t / h + 1e-12));
  double rem = t - static_cast<double>(nfull) * h;
  if (rem < h * 1e-12) rem = 0.0;

  const std::size_t needed = static_cast<std::size_t>(nfull) + (rem > 0.0 ? 1 : 0);
  if (states.size() < needed) throw SequenceTooShortError(states.size(), needed);

  Vec x = std::move(x0);
  for (long k = 0; k < nfull; ++k) x = flow_map(fields, std::move(x), states[static_cast<std::size_t>(k)], h, settings);
  if (rem > 0.0) x = flow_map(fields, std::move(x), states[static_cast<std::size_t>(nfull)], rem, settings);
  return x;
}

std::vector<Vec> numerical_jacobian(const VectorFieldFamily& fields, int s, const Vec& x) {
  const std::size_t d = x.size();
  std::vector<Vec> jac(d, Vec(d, 0.0));
  Vec xp = x, xm = x, fp(d), fm(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double step = 1e-6 * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + step;
    xm[j] = x[j] - step;
    fields.eval(xp, s, fp);
    fields.eval(xm, s, fm);
    for (std::size_t i = 0; i < d; ++i) jac[i][j] = (fp[i] - fm[i]) / (2.0 * step);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return jac;
}

namespace {

// Solves J * delta = rhs by Gaussian elimination with partial pivoting.
// Returns false on a (numerically) singular system.
bool solve_linear(std::vector<Vec> jac, Vec rhs, Vec& delta) {
  const std::size_t d = rhs.size();
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < d; ++r)
      if (std::abs(jac[r][col]) > std::abs(jac[piv][col])) piv = r;
    if (std::abs(jac[piv][col]) < 1e-14) return false;
    std::swap(jac[piv], jac[col]);
    std::swap(rhs[piv], rhs[col]);
    for (std::size_t r = col + 1; r < d; ++r) {
      const double f = jac[r][col] / jac[col][col];
      for (std::size_t c = col; c < d; ++c) jac[r][c] -= f * jac[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  delta.assign(d, 0.0);
  for (std::size_t i = d; i-- > 0;) {
    double acc = rhs[i];
    for (std::size_t c = i + 1; c < d; ++c) acc -= jac[i][c] * delta[c];
    delta[i] = acc / jac[i][i];
  }
  return true;
}

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

std::vector<Vec> find_fixed_points(const VectorFieldFamily& fields, int s, const std::vector<Vec>& seeds, double tol) {
  constexpr int kMaxNewtonIters = 80;
  std::vector<Vec> roots;
  Vec f(static_cast<std::size_t>(fields.dimension()));
  for (const Vec& seed : seeds) {
    Vec x = seed;
    bool converged = false;
    for (int it = 0; it < kMaxNewtonIters; ++it) {
      if (!all_finite(x)) break;
      fields.eval(x, s, f);
      if (norm2(f) < tol) {
        converged = true;
        break;
      }
      Vec rhs(f.size());
      for (std::size_t i = 0; i < f.size(); ++i) rhs[i] = -f[i];
      Vec delta;
      if (!solve_linear(numerical_jacobian(fields, s, x), std::move(rhs), delta)) break;
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += delta[i];
    }
    if (!converged) continue;
    bool duplicate = false;
    for (const Vec& r : roots) {
      double dist = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) dist = std::max(dist, std::abs(r[i] - x[i]));
      if (dist < 1e-6) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) roots.push_back(x);
  }
  return roots;
}

}  // namespace hybridsim::flow
