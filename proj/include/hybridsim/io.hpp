#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hybridsim/limitset.hpp"
#include "hybridsim/measure.hpp"

namespace hybridsim::io {

using HeaderFields = std::vector<std::pair<std::string, std::string>>;

/// Shortest decimal form that parses back to the identical double.
std::string fmt_double(double v);

/// Columnar measure file: commented header (dim, box, bins, h, t0, states,
/// any extra fields), one "state cell weight" row per populated cell, then
/// the overflow row. Round-trips bit-exactly.
void write_grid_measure(const std::string& path, const measure::GridMeasure& mu, double h,
                        const HeaderFields& extra = {});

struct MeasureFile {
  measure::GridMeasure mu;
  double h;
  HeaderFields header;
};

MeasureFile read_grid_measure(const std::string& path);

/// Limit-set file in the same columnar style: "cell epochs visits" rows for
/// the member cells.
void write_limit_set(const std::string& path, const limitset::LimitSetEstimate& estimate, double h, int threshold,
                     const HeaderFields& extra = {});

struct LimitSetFile {
  measure::GridSpec grid;
  double h;
  int threshold;
  std::vector<long> cells;
  std::vector<int> epochs;
  std::vector<std::int64_t> visits;
  HeaderFields header;
};

LimitSetFile read_limit_set(const std::string& path);

}  // namespace hybridsim::io
