#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace ccx::csv {

/// Header-addressed table of string cells. Cells are whitespace-trimmed;
/// quoting is not supported (none of our formats need it).
class Table {
 public:
  static Table read(const std::filesystem::path& path);
  static Table parse(std::string_view text, const std::string& source = "<memory>");

  /// Index of `name` in the header; throws InputError naming the file when absent.
  std::size_t column(std::string_view name) const;
  std::size_t rows() const { return cells_.size(); }
  const std::string& at(std::size_t row, std::size_t col) const { return cells_[row][col]; }
  const std::vector<std::string>& header() const { return header_; }
  const std::string& source() const { return source_; }

  double number(std::size_t row, std::size_t col) const;
  /// Line number in the source file, for error messages.
  std::size_t line(std::size_t row) const { return row + 2; }

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> cells_;
};

/// Shortest decimal that round-trips the double exactly; "NA" for NaN.
std::string format(double v);

class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::vector<std::string>& header);

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((put(cell(cells), first)), ...);
    out_ << '\n';
  }
  void row(const std::vector<std::string>& cells);

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return format(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  void put(const std::string& s, bool& first);

  std::ofstream out_;
};

}  // namespace ccx::csv
