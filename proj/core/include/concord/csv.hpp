#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace concord::csv {

/// A parsed CSV file: one header row plus data rows of raw string cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header, or -1 when absent.
  int column(const std::string& name) const;
};

/// Parse comma-separated content. Handles quoted fields with doubled
/// quotes, CRLF line endings and a missing trailing newline. Rows may be
/// ragged; consumers decide how to treat short rows.
Table parse(std::istream& in);

/// Read and parse a file. Throws DataError when the file cannot be opened
/// or contains no header row.
Table read_file(const std::filesystem::path& path);

/// Shortest representation of `x` that parses back to the same double.
std::string format_double(double x);

/// Parse a finite double. Returns false for empty cells, trailing garbage,
/// NaN or infinities; those are "missing" as far as ingestion is concerned.
bool parse_double(const std::string& cell, double& out);

/// Write `content` to `path` atomically (temp file in the same directory
/// followed by a rename), creating parent directories as needed.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace concord::csv
