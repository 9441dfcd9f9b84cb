#ifndef FIGP_CSV_HPP
#define FIGP_CSV_HPP

#include <string>
#include <vector>

namespace figp {

/// Shortest text that parses back to exactly `v`.
std::string format_number(double v);

/// Six significant digits, the precision used for CSV reports.
std::string format_csv(double v);

/// Writes `content` to `path` via a temporary file in the same directory and a rename,
/// so readers never observe a partially written file. Creates parent directories.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// Splits CSV text into rows of cells. No quoting support; blank lines and lines starting
/// with '#' are skipped.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace figp

#endif  // FIGP_CSV_HPP
