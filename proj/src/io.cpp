#include "otto/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "otto/error.hpp"

namespace otto {

namespace fs = std::filesystem;

const std::vector<std::string>& timeseries_columns() {
  static const std::vector<std::string> cols{"t",         "n_a", "q",     "p",     "var_na", "c_nq",
                                             "c_np",      "n_b", "omega_eff", "U_a", "S_a",    "T_eff",
                                             "P",         "J_b", "Sigma", "g2"};
  return cols;
}

const std::vector<std::string>& se_columns() {
  static const std::vector<std::string> cols{"se_n_a", "se_q", "se_p", "se_var_na", "se_c_nq", "se_c_np", "se_n_b"};
  return cols;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("write to " + tmp.string() + " failed");
  }
  fs::rename(tmp, path);
}

std::string timeseries_csv(const TimeSeries& series, const std::vector<ThermoSample>& thermo) {
  if (thermo.size() != series.size()) throw ShapeError("timeseries_csv: thermo and series differ in length");
  const bool se = series.tier == Tier::Classical;
  if (se && series.errors.size() != series.size()) throw ShapeError("timeseries_csv: classical series lacks errors");
  std::ostringstream os;
  auto header = timeseries_columns();
  if (se) header.insert(header.end(), se_columns().begin(), se_columns().end());
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (std::size_t i = 0; i < series.size(); ++i) {
    const MomentVector& m = series.samples[i];
    const ThermoSample& s = thermo[i];
    const double row[] = {m.t,      m.n_a,   m.q,   m.p,   m.var_na, m.c_nq, m.c_np,  m.n_b,
                          s.omega_eff, s.U_a, s.S_a, s.T_eff, s.P,   s.J_b,  s.Sigma, s.g2};
    bool first = true;
    for (double x : row) {
      os << (first ? "" : ",") << format_number(x);
      first = false;
    }
    if (se) {
      const EnsembleErrors& e = series.errors[i];
      for (double x : {e.n_a, e.q, e.p, e.var_na, e.c_nq, e.c_np, e.n_b}) os << ',' << format_number(x);
    }
    os << '\n';
  }
  return os.str();
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ShapeError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ShapeError(path.string() + ": empty file");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      if (cell == "nan") {
        v = std::nan("");
      } else if (cell == "inf" || cell == "-inf") {
        v = cell[0] == '-' ? -INFINITY : INFINITY;
      } else {
        const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (r.ec != std::errc() || r.ptr != cell.data() + cell.size()) {
          throw ShapeError(path.string() + ":" + std::to_string(lineno) + ": unparsable value '" + cell + "'");
        }
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void validate_timeseries_csv(const fs::path& path, Tier tier) {
  const CsvTable t = read_csv(path);
  auto expect = timeseries_columns();
  if (tier == Tier::Classical) expect.insert(expect.end(), se_columns().begin(), se_columns().end());
  if (t.header != expect) throw ShapeError(path.string() + ": header does not match the column contract");
  double prev = -INFINITY;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path.string() + " row " + std::to_string(r + 1);
    if (row.size() != expect.size()) throw ShapeError(where + ": wrong number of columns");
    if (!(row[0] > prev)) throw ShapeError(where + ": t is not increasing");
    prev = row[0];
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string& name = expect[c];
      const bool may_be_nan = name == "S_a" || name == "T_eff" || name == "g2";
      if (std::isnan(row[c]) && may_be_nan) continue;
      if (!std::isfinite(row[c])) throw ShapeError(where + ": non-finite " + name);
    }
  }
}

TimeSeries timeseries_from_csv(const fs::path& path, Tier tier) {
  validate_timeseries_csv(path, tier);
  const CsvTable t = read_csv(path);
  TimeSeries ts;
  ts.tier = tier;
  for (const auto& row : t.rows) {
    MomentVector m;
    m.t = row[0];
    m.n_a = row[1];
    m.q = row[2];
    m.p = row[3];
    m.var_na = row[4];
    m.c_nq = row[5];
    m.c_np = row[6];
    m.n_b = row[7];
    ts.samples.push_back(m);
    ts.g2.push_back(row[15]);
    if (tier == Tier::Classical) {
      ts.errors.push_back(EnsembleErrors{row[16], row[17], row[18], row[19], row[20], row[21], row[22]});
    }
  }
  return ts;
}

}  // namespace otto
