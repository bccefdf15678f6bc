#pragma once

// Matrix text format: a "rows cols" line, then one whitespace-separated row
// per line, 17 significant digits.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "stiefel/linalg.hpp"

namespace stiefel {

void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);

void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

std::string format_real(double v);

}  // namespace stiefel
