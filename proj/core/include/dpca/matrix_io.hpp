#pragma once

// Matrix interchange formats.
//
// CSV: one row per line, comma separated, '.' decimal point, no header.
// Binary: u32 rows, u32 cols (little-endian), then rows*cols little-endian
// IEEE-754 doubles in row-major order.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "dpca/matrix.hpp"

namespace dpca {

void write_csv(std::ostream& out, const Matrix& m);
Matrix read_csv(std::istream& in);
void save_csv(const std::filesystem::path& path, const Matrix& m);
Matrix load_csv(const std::filesystem::path& path);

void write_binary(std::ostream& out, const Matrix& m);
Matrix read_binary(std::istream& in);
void save_binary(const std::filesystem::path& path, const Matrix& m);
Matrix load_binary(const std::filesystem::path& path);

/// Picks the format by extension: ".csv" is text, anything else binary.
void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace dpca
