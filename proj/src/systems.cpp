#include "hybridsim/systems.hpp"

#include <cmath>
#include <functional>

#include "hybridsim/errors.hpp"

namespace hybridsim::systems {

using hybrid::Box;
using hybrid::HybridSystemSpec;
using hybrid::Interval;
using markov::TransitionMatrix;
using nlohmann::json;

hybrid::HybridSystemSpec build_linear_1d(const TransitionMatrix& q, double h) {
  if (q.size() != 2) throw DomainError("linear_1d needs a 2x2 transition matrix, got " + std::to_string(q.size()));
  std::vector<double> z{1.0, -1.0};
  flow::FieldFn field = [z](std::span<const double> x, int s, std::span<double> dxdt) {
    dxdt[0] = -x[0] + z[static_cast<std::size_t>(s)];
  };
  flow::AnalyticFlowFn analytic = [z](std::span<const double> x, int s, double duration, std::span<double> out) {
    const double zs = z[static_cast<std::size_t>(s)];
    out[0] = zs + (x[0] - zs) * std::exp(-duration);
  };
  flow::VectorFieldFamily fields(1, z, std::move(field), std::move(analytic));
  return HybridSystemSpec(std::move(fields), q, h, Box{{-3.0, 3.0}}, flow::IntegratorSettings{h / 100.0});
}

hybrid::HybridSystemSpec build_cstr_2d(const TransitionMatrix& q, double h, const CstrParams& params) {
  if (q.size() != 3) throw DomainError("cstr_2d needs a 3x3 transition matrix, got " + std::to_string(q.size()));
  std::vector<double> z{-0.15, 0.0, 0.15};
  flow::FieldFn field = [z, params](std::span<const double> x, int s, std::span<double> dxdt) {
    const double g = (1.0 - x[1]) * std::exp(x[0]);
    dxdt[0] = -params.lambda * x[0] - params.beta * (x[0] - params.x_c) + params.B * params.Da * g +
              z[static_cast<std::size_t>(s)] * (1.0 - x[0]);
    dxdt[1] = -params.lambda * x[1] + params.Da * g;
  };
  flow::VectorFieldFamily fields(2, z, std::move(field));
  return HybridSystemSpec(std::move(fields), q, h, Box{{0.0, 8.0}, {0.0, 1.2}},
                          flow::IntegratorSettings{h / 100.0});
}

namespace {

struct CatalogEntry {
  std::string name;
  int dimension;
  int states;
  std::vector<std::vector<double>> default_q;
  std::vector<int> default_bins;
  flow::Vec default_x0;
  int default_z0;
  std::function<HybridSystemSpec(const TransitionMatrix&, double, const json&)> build;
};

const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries = {
      CatalogEntry{"linear_1d",
                   1,
                   2,
                   {{0.4, 0.6}, {0.5, 0.5}},
                   {200},
                   {2.0},
                   0,
                   [](const TransitionMatrix& q, double h, const json&) { return build_linear_1d(q, h); }},
      CatalogEntry{"cstr_2d",
                   2,
                   3,
                   {{0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}},
                   {100, 100},
                   {3.5, 0.75},
                   1,
                   [](const TransitionMatrix& q, double h, const json& doc) {
                     CstrParams params;
                     if (doc.contains("cstr")) {
                       const json& c = doc.at("cstr");
                       if (!c.is_object()) throw SchemaViolationError("cstr", "expected an object");
                       for (const auto& [key, value] : c.items()) {
                         if (!value.is_number()) throw SchemaViolationError("cstr." + key, "expected a number");
                         const double v = value.get<double>();
                         if (key == "lambda") params.lambda = v;
                         else if (key == "beta") params.beta = v;
                         else if (key == "x_c") params.x_c = v;
                         else if (key == "B") params.B = v;
                         else if (key == "Da") params.Da = v;
                         else throw SchemaViolationError("cstr." + key, "unknown parameter");
                       }
                     }
                     return build_cstr_2d(q, h, params);
                   }}};
  return entries;
}

const CatalogEntry& find_entry(const std::string& name) {
  for (const auto& entry : catalog())
    if (entry.name == name) return entry;
  throw UnknownSystemError(name, catalog_names());
}

double require_number(const json& doc, const std::string& path) {
  if (!doc.is_number()) throw SchemaViolationError(path, "expected a number");
  return doc.get<double>();
}

TransitionMatrix parse_q(const json& doc, const CatalogEntry& entry) {
  if (!doc.contains("Q")) return TransitionMatrix::validate(entry.default_q);
  const json& q = doc.at("Q");
  if (!q.is_array()) throw SchemaViolationError("Q", "expected an array of rows");
  if (static_cast<int>(q.size()) != entry.states)
    throw SchemaViolationError("Q", entry.name + " needs a " + std::to_string(entry.states) + "x" +
                                        std::to_string(entry.states) + " transition matrix");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const json& row = q[i];
    if (!row.is_array()) throw SchemaViolationError("Q[" + std::to_string(i) + "]", "expected an array");
    if (static_cast<int>(row.size()) != entry.states)
      throw SchemaViolationError("Q[" + std::to_string(i) + "]",
                                 entry.name + " needs rows of length " + std::to_string(entry.states));
    std::vector<double> r;
    for (std::size_t j = 0; j < row.size(); ++j)
      r.push_back(require_number(row[j], "Q[" + std::to_string(i) + "][" + std::to_string(j) + "]"));
    rows.push_back(std::move(r));
  }
  return TransitionMatrix::validate(rows);
}

}  // namespace

std::vector<std::string> catalog_names() {
  std::vector<std::string> names;
  for (const auto& entry : catalog()) names.push_back(entry.name);
  return names;
}

markov::TransitionMatrix default_q(const std::string& name) {
  return TransitionMatrix::validate(find_entry(name).default_q);
}

LoadedSystem load_system(const json& doc) {
  if (!doc.is_object()) throw SchemaViolationError("(root)", "config must be an object");
  static const char* known_keys[] = {"system", "h", "Q", "box", "bins", "integrator_step", "x0", "z0", "cstr"};
  for (const auto& [key, value] : doc.items()) {
    bool ok = false;
    for (const char* k : known_keys) ok = ok || key == k;
    if (!ok) throw SchemaViolationError(key, "unknown config field");
  }
  if (!doc.contains("system") || !doc.at("system").is_string())
    throw SchemaViolationError("system", "required string naming a catalog entry");
  const CatalogEntry& entry = find_entry(doc.at("system").get<std::string>());
  if (doc.contains("cstr") && entry.name != "cstr_2d")
    throw SchemaViolationError("cstr", "only valid for system cstr_2d");

  double h = 1.0;
  if (doc.contains("h")) {
    h = require_number(doc.at("h"), "h");
    if (!(h > 0.0)) throw SchemaViolationError("h", "switch period must be positive");
  }

  const TransitionMatrix q = parse_q(doc, entry);
  HybridSystemSpec spec = entry.build(q, h, doc);

  if (doc.contains("box")) {
    const json& b = doc.at("box");
    if (!b.is_array() || static_cast<int>(b.size()) != entry.dimension)
      throw SchemaViolationError("box", "expected one [lo, hi] pair per axis");
    Box box;
    for (std::size_t a = 0; a < b.size(); ++a) {
      const std::string path = "box[" + std::to_string(a) + "]";
      if (!b[a].is_array() || b[a].size() != 2) throw SchemaViolationError(path, "expected [lo, hi]");
      const double lo = require_number(b[a][0], path);
      const double hi = require_number(b[a][1], path);
      if (!(lo < hi)) throw SchemaViolationError(path, "needs lo < hi");
      box.push_back(Interval{lo, hi});
    }
    spec = HybridSystemSpec(spec.fields, spec.q, spec.h, std::move(box), spec.integrator);
  }

  if (doc.contains("integrator_step")) {
    const double step = require_number(doc.at("integrator_step"), "integrator_step");
    if (!(step > 0.0) || step > h) throw SchemaViolationError("integrator_step", "must lie in (0, h]");
    spec = HybridSystemSpec(spec.fields, spec.q, spec.h, spec.box, flow::IntegratorSettings{step});
  }

  std::vector<int> bins = entry.default_bins;
  if (doc.contains("bins")) {
    const json& b = doc.at("bins");
    if (!b.is_array() || static_cast<int>(b.size()) != entry.dimension)
      throw SchemaViolationError("bins", "expected one bin count per axis");
    bins.clear();
    for (std::size_t a = 0; a < b.size(); ++a) {
      const std::string path = "bins[" + std::to_string(a) + "]";
      if (!b[a].is_number_integer()) throw SchemaViolationError(path, "expected an integer");
      const int n = b[a].get<int>();
      if (n < 1) throw SchemaViolationError(path, "needs at least one bin");
      bins.push_back(n);
    }
  }

  flow::Vec x0 = entry.default_x0;
  if (doc.contains("x0")) {
    const json& x = doc.at("x0");
    if (!x.is_array() || static_cast<int>(x.size()) != entry.dimension)
      throw SchemaViolationError("x0", "expected one coordinate per axis");
    x0.clear();
    for (std::size_t a = 0; a < x.size(); ++a) x0.push_back(require_number(x[a], "x0[" + std::to_string(a) + "]"));
  }

  int z0 = entry.default_z0;
  if (doc.contains("z0")) {
    if (!doc.at("z0").is_number_integer()) throw SchemaViolationError("z0", "expected a state index");
    z0 = doc.at("z0").get<int>();
    if (z0 < 0 || z0 >= entry.states) throw SchemaViolationError("z0", "state index out of range");
  }

  return LoadedSystem{entry.name, std::move(spec), std::move(bins), std::move(x0), z0};
}

}  // namespace hybridsim::systems
