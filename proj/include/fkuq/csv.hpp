#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fkuq::csv {

/// Round-trippable decimal representation (17 significant digits).
std::string format(double v);

/// Numeric table with a header row. Cells are parsed as doubles.
struct Table
{
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column index by name; throws ValidationError when absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

Table read(const std::filesystem::path& path);

/// Line-oriented writer that fails loudly when the file cannot be opened.
class Writer
{
 public:
  explicit Writer(const std::filesystem::path& path);

  void header(const std::vector<std::string>& names);
  void row(const std::vector<double>& values);
  /// Row with a leading text cell.
  void row(const std::string& first, const std::vector<double>& values);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

}  // namespace fkuq::csv
