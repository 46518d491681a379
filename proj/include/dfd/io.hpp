#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dfd/tensor.hpp"

namespace dfd::io {

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);
double parse_double(std::string_view text, const std::filesystem::path& where);
long long parse_int(std::string_view text, const std::filesystem::path& where);

// Writes via a sibling temporary file and rename, so readers never observe a
// partially written file. Throws IoError naming the path.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
// Throws ValidationError if the file does not exist, IoError if it cannot be read.
std::string read_file(const std::filesystem::path& path);

std::string matrix_to_csv(const Matrix& m);
Matrix matrix_from_csv(std::string_view text, const std::filesystem::path& where);
std::string ints_to_csv(std::span<const int> v);
std::vector<int> ints_from_csv(std::string_view text, const std::filesystem::path& where);

}  // namespace dfd::io
