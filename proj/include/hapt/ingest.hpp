#pragma once

// Text input and output. Samples arrive as `sample_id,value` rows; tables
// leave as comma-separated decimals with 17 significant digits, so reading
// a table back reproduces every value bit for bit.
//
// The model always runs on (0, 1]. DataTransform maps the user's domain
// [lo, hi] affinely onto it; densities are reported on the original scale
// by dividing by the width (the Jacobian).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hapt/error.hpp"
#include "hapt/partition.hpp"

namespace hapt {

struct DataTransform {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  double to_unit(double x) const {
    if (x == hi) return 1.0;  // exact at the right edge
    return (x - lo) / width();
  }
  double from_unit(double y) const { return y == 1.0 ? hi : lo + y * width(); }
  double density_to_original(double unit_density) const { return unit_density / width(); }
};

struct Dataset {
  std::vector<std::string> ids;               // first-appearance order
  std::vector<std::vector<double>> values;    // original scale
  DataTransform transform;

  std::vector<std::vector<double>> unit_values() const {
    std::vector<std::vector<double>> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      out[i].reserve(values[i].size());
      for (double x : values[i]) out[i].push_back(transform.to_unit(x));
    }
    return out;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace detail

// Domain used when bounds are not given: [min - 0.001 range, max]. A
// constant dataset gets range 1 so the domain stays nondegenerate.
inline DataTransform auto_transform(const std::vector<std::vector<double>>& values) {
  double mn = INFINITY, mx = -INFINITY;
  for (const auto& s : values)
    for (double x : s) {
      mn = std::min(mn, x);
      mx = std::max(mx, x);
    }
  if (!(mn <= mx)) throw InvalidArgument("dataset has no observations");
  const double range = mx > mn ? mx - mn : 1.0;
  return {mn - 0.001 * range, mx};
}

// Reads `sample_id,value` rows. With explicit bounds every value must lie
// in [lo, hi]; otherwise the automatic domain is used.
inline Dataset read_samples(std::istream& in, const std::optional<Interval>& bounds = std::nullopt,
                            const std::string& name = "input") {
  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto f = detail::split_csv(t);
    if (!header) {
      if (f.size() != 2 || f[0] != "sample_id" || f[1] != "value")
        throw ParseError(name + ":" + std::to_string(line_no) + ": expected header 'sample_id,value'", line_no);
      header = true;
      continue;
    }
    if (f.size() != 2)
      throw ParseError(name + ":" + std::to_string(line_no) + ": expected 2 fields, got " + std::to_string(f.size()),
                       line_no);
    if (f[0].empty()) throw ParseError(name + ":" + std::to_string(line_no) + ": empty sample_id", line_no);
    double x;
    if (!detail::parse_double(f[1], x) || !std::isfinite(x))
      throw ParseError(name + ":" + std::to_string(line_no) + ": value '" + f[1] + "' is not a finite number", line_no);
    if (bounds && !(x >= bounds->lo && x <= bounds->hi)) {
      std::ostringstream os;
      os.precision(17);
      os << name << ":" << line_no << ": value " << x << " outside bounds [" << bounds->lo << ", " << bounds->hi
         << "]";
      throw ParseError(os.str(), line_no);
    }
    const auto [it, inserted] = index.try_emplace(f[0], d.ids.size());
    if (inserted) {
      d.ids.push_back(f[0]);
      d.values.emplace_back();
    }
    d.values[it->second].push_back(x);
    ++rows;
  }
  if (!header) throw ParseError(name + ": empty file (missing header 'sample_id,value')", line_no);
  if (rows == 0) throw ParseError(name + ": no data rows", line_no);
  if (bounds) {
    if (!(bounds->lo < bounds->hi)) throw InvalidArgument("bounds must satisfy lo < hi");
    d.transform = {bounds->lo, bounds->hi};
  } else {
    d.transform = auto_transform(d.values);
  }
  return d;
}

inline Dataset read_samples(const std::string& path, const std::optional<Interval>& bounds = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file '" + path + "'");
  return read_samples(in, bounds, path);
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_samples(std::ostream& out, const std::vector<std::string>& ids,
                          const std::vector<std::vector<double>>& values) {
  out << "sample_id,value\n";
  for (std::size_t i = 0; i < values.size(); ++i)
    for (double x : values[i]) out << ids[i] << ',' << format_double(x) << '\n';
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) return c;
    throw InvalidArgument("table has no column '" + name + "'");
  }
};

inline void write_table(std::ostream& out, const Table& t) {
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
  out << '\n';
  for (const auto& r : t.rows) {
    if (r.size() != t.columns.size()) throw InvalidArgument("table row width differs from the header");
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << format_double(r[c]);
    out << '\n';
  }
}

inline Table read_table(std::istream& in, const std::string& name = "table") {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto f = detail::split_csv(line);
    if (t.columns.empty()) {
      t.columns = std::move(f);
      continue;
    }
    if (f.size() != t.columns.size())
      throw ParseError(name + ":" + std::to_string(line_no) + ": row width differs from the header", line_no);
    std::vector<double> r(f.size());
    for (std::size_t c = 0; c < f.size(); ++c) {
      if (f[c] == "nan") r[c] = NAN;
      else if (f[c] == "inf") r[c] = INFINITY;
      else if (f[c] == "-inf") r[c] = -INFINITY;
      else if (!detail::parse_double(f[c], r[c]))
        throw ParseError(name + ":" + std::to_string(line_no) + ": '" + f[c] + "' is not a number", line_no);
    }
    t.rows.push_back(std::move(r));
  }
  if (t.columns.empty()) throw ParseError(name + ": empty table", line_no);
  return t;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace hapt
