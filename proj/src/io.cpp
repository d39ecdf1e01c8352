#include "hybridsim/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hybridsim/errors.hpp"

namespace hybridsim::io {

namespace {

constexpr const char* kMeasureMagic = "# hybridsim-measure v1";
constexpr const char* kLimitSetMagic = "# hybridsim-limitset v1";

double parse_double(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw SchemaViolationError(context, "expected a number, got \"" + s + "\"");
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

struct ParsedHeader {
  HeaderFields fields;
  std::vector<std::string> body;
};

ParsedHeader read_lines(const std::string& path, const char* magic) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open \"" + path + "\" for reading");
  std::string line;
  if (!std::getline(in, line) || line != magic)
    throw SchemaViolationError(path, std::string("missing file signature \"") + magic + "\"");
  ParsedHeader parsed;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string key = line.substr(2, colon - 2);
      std::string value = line.substr(colon + 1);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      parsed.fields.emplace_back(std::move(key), std::move(value));
    } else {
      parsed.body.push_back(line);
    }
  }
  return parsed;
}

std::string lookup(const ParsedHeader& parsed, const std::string& key, const std::string& path) {
  for (const auto& [k, v] : parsed.fields)
    if (k == key) return v;
  throw SchemaViolationError(path, "missing header field \"" + key + "\"");
}

measure::GridSpec parse_grid(const ParsedHeader& parsed, const std::string& path) {
  const int dim = static_cast<int>(parse_double(lookup(parsed, "dim", path), "dim"));
  const auto box_tokens = split_ws(lookup(parsed, "box", path));
  const auto bins_tokens = split_ws(lookup(parsed, "bins", path));
  if (static_cast<int>(box_tokens.size()) != 2 * dim) throw SchemaViolationError(path, "box needs lo hi per axis");
  if (static_cast<int>(bins_tokens.size()) != dim) throw SchemaViolationError(path, "bins needs one count per axis");
  measure::GridSpec grid;
  for (int a = 0; a < dim; ++a) {
    grid.box.push_back(hybrid::Interval{parse_double(box_tokens[2 * a], "box"), parse_double(box_tokens[2 * a + 1], "box")});
    grid.bins.push_back(static_cast<int>(parse_double(bins_tokens[a], "bins")));
  }
  grid.validate();
  return grid;
}

void write_grid_header(std::ofstream& out, const measure::GridSpec& grid, double h, const HeaderFields& extra) {
  out << "# dim: " << grid.dim() << "\n# box:";
  for (const auto& axis : grid.box) out << ' ' << fmt_double(axis.lo) << ' ' << fmt_double(axis.hi);
  out << "\n# bins:";
  for (int b : grid.bins) out << ' ' << b;
  out << "\n# h: " << fmt_double(h) << '\n';
  for (const auto& [k, v] : extra) out << "# " << k << ": " << v << '\n';
}

}  // namespace

std::string fmt_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

void write_grid_measure(const std::string& path, const measure::GridMeasure& mu, double h, const HeaderFields& extra) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open \"" + path + "\" for writing");
  out << kMeasureMagic << '\n';
  write_grid_header(out, mu.grid, h, {});
  out << "# t0: " << fmt_double(mu.phase) << '\n';
  out << "# states: " << mu.states << '\n';
  for (const auto& [k, v] : extra) out << "# " << k << ": " << v << '\n';
  out << "# columns: state cell weight\n";
  const long cells = mu.grid.cell_count();
  for (int s = 0; s < mu.states; ++s)
    for (long c = 0; c < cells; ++c) {
      const double w = mu.at(s, c);
      if (w != 0.0) out << s << ' ' << c << ' ' << fmt_double(w) << '\n';
    }
  out << "overflow " << fmt_double(mu.overflow) << '\n';
  if (!out) throw UsageError("failed writing \"" + path + "\"");
}

MeasureFile read_grid_measure(const std::string& path) {
  const ParsedHeader parsed = read_lines(path, kMeasureMagic);
  const measure::GridSpec grid = parse_grid(parsed, path);
  const double h = parse_double(lookup(parsed, "h", path), "h");
  const double t0 = parse_double(lookup(parsed, "t0", path), "t0");
  const int states = static_cast<int>(parse_double(lookup(parsed, "states", path), "states"));

  measure::GridMeasure mu(grid, states, t0);
  bool have_overflow = false;
  for (const auto& line : parsed.body) {
    const auto tokens = split_ws(line);
    if (!tokens.empty() && tokens[0] == "overflow") {
      if (tokens.size() != 2) throw SchemaViolationError(path, "overflow row needs one value");
      mu.overflow = parse_double(tokens[1], "overflow");
      have_overflow = true;
      continue;
    }
    if (tokens.size() != 3) throw SchemaViolationError(path, "data rows are: state cell weight");
    const int s = static_cast<int>(parse_double(tokens[0], "state"));
    const long c = static_cast<long>(parse_double(tokens[1], "cell"));
    if (s < 0 || s >= states) throw SchemaViolationError(path, "state index out of range");
    if (c < 0 || c >= grid.cell_count()) throw SchemaViolationError(path, "cell index out of range");
    mu.at(s, c) = parse_double(tokens[2], "weight");
  }
  if (!have_overflow) throw SchemaViolationError(path, "missing overflow row");
  return MeasureFile{std::move(mu), h, parsed.fields};
}

void write_limit_set(const std::string& path, const limitset::LimitSetEstimate& estimate, double h, int threshold,
                     const HeaderFields& extra) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open \"" + path + "\" for writing");
  out << kLimitSetMagic << '\n';
  write_grid_header(out, estimate.grid, h, {});
  out << "# threshold: " << threshold << '\n';
  for (const auto& [k, v] : extra) out << "# " << k << ": " << v << '\n';
  out << "# columns: cell epochs visits\n";
  for (long c : estimate.cells) {
    const auto i = static_cast<std::size_t>(c);
    out << c << ' ' << estimate.occupancy.epochs[i] << ' ' << estimate.occupancy.visits[i] << '\n';
  }
  if (!out) throw UsageError("failed writing \"" + path + "\"");
}

LimitSetFile read_limit_set(const std::string& path) {
  const ParsedHeader parsed = read_lines(path, kLimitSetMagic);
  LimitSetFile file;
  file.grid = parse_grid(parsed, path);
  file.h = parse_double(lookup(parsed, "h", path), "h");
  file.threshold = static_cast<int>(parse_double(lookup(parsed, "threshold", path), "threshold"));
  file.header = parsed.fields;
  for (const auto& line : parsed.body) {
    const auto tokens = split_ws(line);
    if (tokens.size() != 3) throw SchemaViolationError(path, "data rows are: cell epochs visits");
    file.cells.push_back(static_cast<long>(parse_double(tokens[0], "cell")));
    file.epochs.push_back(static_cast<int>(parse_double(tokens[1], "epochs")));
    file.visits.push_back(static_cast<std::int64_t>(parse_double(tokens[2], "visits")));
  }
  return file;
}

}  // namespace hybridsim::io
