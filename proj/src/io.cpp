#include "dfd/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "dfd/error.hpp"

namespace dfd::io {
namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const fs::path& where) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ValidationError(where.string() + ": cannot parse number '" + std::string(text) + "'");
  return v;
}

long long parse_int(std::string_view text, const fs::path& where) {
  long long v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ValidationError(where.string() + ": cannot parse integer '" + std::string(text) + "'");
  return v;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  out.reserve(m.size() * 20);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

namespace {

template <typename F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) f(line);
    pos = end + 1;
  }
}

}  // namespace

Matrix matrix_from_csv(std::string_view text, const fs::path& where) {
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  for_each_line(text, [&](std::string_view line) {
    std::size_t c = 0, pos = 0;
    while (true) {
      std::size_t comma = line.find(',', pos);
      std::string_view cell = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      values.push_back(parse_double(cell, where));
      ++c;
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (rows == 0) cols = c;
    else if (c != cols)
      throw ValidationError(where.string() + ": row " + std::to_string(rows) + " has " + std::to_string(c) +
                            " columns, expected " + std::to_string(cols));
    ++rows;
  });
  Matrix m(rows, cols);
  m.storage() = std::move(values);
  return m;
}

std::string ints_to_csv(std::span<const int> v) {
  std::string out;
  for (int x : v) {
    out += std::to_string(x);
    out += '\n';
  }
  return out;
}

std::vector<int> ints_from_csv(std::string_view text, const fs::path& where) {
  std::vector<int> out;
  for_each_line(text, [&](std::string_view line) { out.push_back(static_cast<int>(parse_int(line, where))); });
  return out;
}

}  // namespace dfd::io
