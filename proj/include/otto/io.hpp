#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "otto/series.hpp"
#include "otto/thermo.hpp"

namespace otto {

/// Time-series columns in file order; the classical tier appends se_columns().
const std::vector<std::string>& timeseries_columns();
const std::vector<std::string>& se_columns();

/// Writes `content` to a sibling temporary file and renames it into place.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string timeseries_csv(const TimeSeries& series, const std::vector<ThermoSample>& thermo);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Checks the header order, row widths, increasing t and finiteness (S_a,
/// T_eff and g2 may be nan). Throws ShapeError describing the first violation.
void validate_timeseries_csv(const std::filesystem::path& path, Tier tier);

/// Rebuilds the moment samples, g2 and errors of a written time series.
TimeSeries timeseries_from_csv(const std::filesystem::path& path, Tier tier);

/// Shortest round-trip decimal form; "nan" and "inf" for non-finite values.
std::string format_number(double x);

}  // namespace otto
