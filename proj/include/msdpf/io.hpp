#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "msdpf/models.hpp"

namespace msdpf::io {

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, end);
}

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CsvError : public InputError {
 public:
  CsvError(const std::string& path, std::size_t line, const std::string& what)
      : InputError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line per row

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw CsvError(path, 1, "missing column '" + std::string(name) + "'");
  }
  bool has_column(std::string_view name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }

  double number(std::size_t row, std::size_t col) const {
    const std::string& s = rows[row][col];
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
      throw CsvError(path, line_numbers[row], "cannot parse number '" + s + "'");
    return v;
  }
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.emplace_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline CsvTable parse_csv(const std::string& text, const std::string& path = "<memory>") {
  CsvTable t;
  t.path = path;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw CsvError(path, lineno,
                     "expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  return t;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path), path.string()); }

namespace detail {
inline std::string column_names(const char* stem, std::size_t dim) {
  if (dim == 1) return stem;
  std::string s;
  for (std::size_t d = 0; d < dim; ++d) s += (d ? "," : "") + std::string(stem) + "_" + std::to_string(d + 1);
  return s;
}
}  // namespace detail

// `t,x,y` with one row per time step.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::string s = "t," + detail::column_names("x", traj.states.dim) + "," +
                  detail::column_names("y", traj.observations.dim) + "\n";
  for (std::size_t i = 0; i < traj.length(); ++i) {
    s += std::to_string(traj.observations.time(i));
    for (double v : traj.states.row(i)) s += "," + format_double(v);
    for (double v : traj.observations.row(i)) s += "," + format_double(v);
    s += "\n";
  }
  return s;
}

struct ObservationFile {
  TimeSeries observations;
  std::optional<TimeSeries> states;  // present when every row has a ground-truth x
};

// Reads a `t,x,y` (or `t,y`) file. Time indices must be consecutive.
inline ObservationFile read_observations(const std::filesystem::path& path) {
  const CsvTable tab = read_csv(path);
  if (tab.header.empty() || tab.rows.empty()) throw CsvError(path.string(), 1, "no data rows");
  const std::size_t tcol = tab.column("t");
  std::vector<std::size_t> ycols, xcols;
  for (std::size_t c = 0; c < tab.header.size(); ++c) {
    const auto& h = tab.header[c];
    if (h == "y" || h.rfind("y_", 0) == 0) ycols.push_back(c);
    if (h == "x" || h.rfind("x_", 0) == 0) xcols.push_back(c);
  }
  if (ycols.empty()) throw CsvError(path.string(), 1, "missing column 'y'");

  ObservationFile f;
  const int start = static_cast<int>(tab.number(0, tcol));
  f.observations = TimeSeries(start, ycols.size());
  TimeSeries states(start, xcols.empty() ? 1 : xcols.size());
  bool have_states = !xcols.empty();
  std::vector<double> buf;
  for (std::size_t r = 0; r < tab.rows.size(); ++r) {
    const double t = tab.number(r, tcol);
    if (t != static_cast<double>(start) + static_cast<double>(r))
      throw CsvError(path.string(), tab.line_numbers[r], "time index is not consecutive");
    buf.clear();
    for (auto c : ycols) buf.push_back(tab.number(r, c));
    f.observations.push_back(buf);
    if (have_states) {
      buf.clear();
      for (auto c : xcols) {
        if (tab.rows[r][c].empty()) {
          have_states = false;
          break;
        }
        buf.push_back(tab.number(r, c));
      }
      if (have_states) states.push_back(buf);
    }
  }
  if (have_states) f.states = std::move(states);
  return f;
}

}  // namespace msdpf::io
