#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hybridsim/hybrid.hpp"

namespace hybridsim::systems {

/// Parameters of the general reactor model
///   dx1/dt = -lambda*x1 - beta*(x1 - x_c) + B*Da*g(x1,x2) + Z*(1 - x1)
///   dx2/dt = -lambda*x2 + Da*g(x1,x2),      g(x1,x2) = (1 - x2)*exp(x1)
/// with the switching signal Z entering through the coolant term. The
/// defaults reduce to dx1/dt = -x1 - .15(x1-1) + .35(1-x2)e^x1 + Z(1-x1),
/// dx2/dt = -x2 + .05(1-x2)e^x1.
struct CstrParams {
  double lambda = 1.0;
  double beta = 0.15;
  double x_c = 1.0;
  double B = 7.0;
  double Da = 0.05;
};

/// 1-D linear system dx/dt = -x + Z with states (+1, -1) in that order, the
/// closed-form flow x(t) = Z + (x0 - Z) exp(-t) installed, box [-3, 3] and
/// RK4 step h/100. Q must be 2x2.
hybrid::HybridSystemSpec build_linear_1d(const markov::TransitionMatrix& q, double h);

/// 2-D stirred-tank reactor with states Z in (-0.15, 0, 0.15) in that order,
/// box [0, 8] x [0, 1.2], RK4 step h/100, no closed-form flow. Q must be 3x3.
hybrid::HybridSystemSpec build_cstr_2d(const markov::TransitionMatrix& q, double h, const CstrParams& params = {});

/// A system resolved from a config document: the validated spec plus the
/// grid, initial condition and seed defaults the subcommands start from.
struct LoadedSystem {
  std::string name;
  hybrid::HybridSystemSpec spec;
  std::vector<int> bins;
  flow::Vec x0;
  int z0;
};

/// Names of the built-in systems.
std::vector<std::string> catalog_names();

/// Default transition matrix of a catalog entry.
markov::TransitionMatrix default_q(const std::string& name);

/// Resolves a config document (see README for the schema) into a validated
/// system. Throws UnknownSystemError, SchemaViolationError (with the field
/// path) or the transition-matrix validation errors.
LoadedSystem load_system(const nlohmann::json& doc);

}  // namespace hybridsim::systems
