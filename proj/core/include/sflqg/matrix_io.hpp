#pragma once

#include "sflqg/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

// Plain-text matrix format: a header line "rows cols" followed by `rows`
// lines of space-separated decimals. Blank lines and lines starting with '#'
// are ignored. A file may hold several consecutive blocks.
namespace sflqg {

/// Reads one matrix block. Throws ParseError on malformed input.
Matrix read_matrix(std::istream& in);

/// Reads every block until end of input.
std::vector<Matrix> read_matrices(std::istream& in);
std::vector<Matrix> read_matrix_file(const std::filesystem::path& path);

/// Writes one block using 17 significant digits.
void write_matrix(std::ostream& out, const Matrix& m);
std::string format_matrix(const Matrix& m);

}  // namespace sflqg
