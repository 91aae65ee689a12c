#include "ccx/csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "ccx/error.hpp"

namespace ccx::csv {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.emplace_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

Table Table::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

Table Table::parse(std::string_view text, const std::string& source) {
  Table t;
  t.source_ = source;
  bool have_header = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split(line);
    if (!have_header) {
      t.header_ = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != t.header_.size()) {
        throw InputError(source + ": row " + std::to_string(t.cells_.size() + 2) + " has " +
                         std::to_string(fields.size()) + " fields, expected " +
                         std::to_string(t.header_.size()));
      }
      t.cells_.push_back(std::move(fields));
    }
    if (end == text.size()) break;
  }
  if (!have_header) throw InputError(source + ": empty file");
  return t;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  throw InputError(source_ + ": missing column '" + std::string(name) + "'");
}

double Table::number(std::size_t row, std::size_t col) const {
  const std::string& s = cells_[row][col];
  if (s == "NA" || s == "nan" || s == "NaN") return std::nan("");
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InputError(source_ + ": line " + std::to_string(line(row)) + ": '" + s +
                     "' is not a number");
  }
  return v;
}

std::string format(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

Writer::Writer(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path) {
  if (!out_) throw InputError("cannot write " + path.string());
  row(header);
}

void Writer::row(const std::vector<std::string>& cells) {
  bool first = true;
  for (const auto& c : cells) put(c, first);
  out_ << '\n';
}

void Writer::put(const std::string& s, bool& first) {
  if (!first) out_ << ',';
  out_ << s;
  first = false;
}

}  // namespace ccx::csv
