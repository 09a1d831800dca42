#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ndhmc {

/// Shortest decimal string that round-trips to the same double. Non-finite
/// values print as "inf", "-inf" and "nan".
std::string format_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& columns);
  CsvWriter& cell(const std::string& v);
  CsvWriter& cell(const char* v) { return cell(std::string(v)); }
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(unsigned long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(unsigned v) { return cell(static_cast<unsigned long long>(v)); }
  CsvWriter& cell(unsigned long v) { return cell(static_cast<unsigned long long>(v)); }
  CsvWriter& cell(long v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(bool v) { return cell(v ? 1LL : 0LL); }
  void end_row();

 private:
  std::ostream& out_;
  bool row_started_ = false;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

/// Minimal reader for the files this library writes (no quoting).
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace ndhmc
