#include "fkuq/csv.hpp"

#include "fkuq/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace fkuq::csv {

std::string format(double v)
{
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::size_t Table::column(const std::string& name) const
{
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError("csv: missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(const std::string& name) const
{
  return std::find(header.begin(), header.end(), name) != header.end();
}

namespace {

std::vector<std::string> split(const std::string& line)
{
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& s, const std::filesystem::path& path, std::size_t line_no)
{
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError("csv: " + path.string() + ":" + std::to_string(line_no) + ": not a number '" + s + "'");
  return v;
}

}  // namespace

Table read(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw ValidationError("csv: cannot open " + path.string());
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ValidationError("csv: " + path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(t.header.size()) + " cells, got " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_cell(c, path, line_no));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ValidationError("csv: " + path.string() + ": empty file");
  return t;
}

Writer::Writer(const std::filesystem::path& path)
    : out_(path)
    , path_(path)
{
  if (!out_) throw ValidationError("csv: cannot write " + path.string());
}

void Writer::header(const std::vector<std::string>& names)
{
  for (std::size_t k = 0; k < names.size(); ++k) out_ << (k ? "," : "") << names[k];
  out_ << '\n';
}

void Writer::row(const std::vector<double>& values)
{
  for (std::size_t k = 0; k < values.size(); ++k) out_ << (k ? "," : "") << format(values[k]);
  out_ << '\n';
}

void Writer::row(const std::string& first, const std::vector<double>& values)
{
  out_ << first;
  for (double v : values) out_ << ',' << format(v);
  out_ << '\n';
}

}  // namespace fkuq::csv
