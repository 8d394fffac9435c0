#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace expctr::io {

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double value);
std::string format_optional(const std::optional<double>& value);

/// Rows of a CSV table held in memory; written in one go.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  void truncate(std::size_t rows);

  std::string to_string() const;
  void write(const std::filesystem::path& path) const;
  static CsvTable read(const std::filesystem::path& path);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace expctr::io
