#pragma once

#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace qsrlab {

// CSV output: comma separation, '.' decimal, header row, LF line endings.
// Doubles are printed with std::to_chars (shortest round-trip form) so that
// output files are bit-reproducible across runs and thread counts.

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << names[i];
    }
    out_ << '\n';
  }

  CsvWriter& field(double v) {
    sep();
    out_ << format_double(v);
    return *this;
  }
  CsvWriter& field(std::int64_t v) {
    sep();
    out_ << v;
    return *this;
  }
  CsvWriter& field(std::string_view v) {
    sep();
    out_ << v;
    return *this;
  }

  void endrow() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace qsrlab
