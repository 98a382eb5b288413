#include "itl/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "itl/error.hpp"

namespace itl::mm {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// %.17g round-trips every finite double exactly.
std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') continue;
    return true;
  }
  return false;
}

void write_impl(std::ostream& out, const Matrix& m, Layout layout, bool symmetric) {
  const char* layout_name = layout == Layout::Coordinate ? "coordinate" : "array";
  out << "%%MatrixMarket matrix " << layout_name << " real " << (symmetric ? "symmetric" : "general") << '\n';
  if (layout == Layout::Array) {
    out << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t j = 0; j < m.cols(); ++j)
      for (std::size_t i = symmetric ? j : 0; i < m.rows(); ++i) out << format_value(m(i, j)) << '\n';
    return;
  }
  std::size_t nnz = 0;
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = symmetric ? j : 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) ++nnz;
  out << m.rows() << ' ' << m.cols() << ' ' << nnz << '\n';
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = symmetric ? j : 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) out << i + 1 << ' ' << j + 1 << ' ' << format_value(m(i, j)) << '\n';
}

template <typename M>
void write_file_impl(const std::filesystem::path& path, const M& m, Layout layout) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "' for writing");
  write(out, m, layout);
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "failed writing '" + path.string() + "'");
}

}  // namespace

Matrix read(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorKind::ParseError, "empty MatrixMarket stream");
  std::istringstream hs(header);
  std::string banner, object, layout, field, symmetry;
  hs >> banner >> object >> layout >> field >> symmetry;
  if (banner != "%%MatrixMarket" || lower(object) != "matrix") {
    throw Error(ErrorKind::ParseError, "missing '%%MatrixMarket matrix' banner");
  }
  layout = lower(layout);
  field = lower(field);
  symmetry = lower(symmetry);
  if (field != "real" && field != "integer" && field != "double") {
    throw Error(ErrorKind::ParseError, "unsupported field '" + field + "'");
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    throw Error(ErrorKind::ParseError, "unsupported symmetry '" + symmetry + "'");
  }
  const bool symmetric = symmetry == "symmetric";

  std::string line;
  if (!next_data_line(in, line)) throw Error(ErrorKind::ParseError, "missing size line");
  std::istringstream sizes(line);
  std::size_t rows = 0, cols = 0, nnz = 0;
  if (layout == "coordinate") {
    if (!(sizes >> rows >> cols >> nnz)) throw Error(ErrorKind::ParseError, "bad coordinate size line");
  } else if (layout == "array") {
    if (!(sizes >> rows >> cols)) throw Error(ErrorKind::ParseError, "bad array size line");
  } else {
    throw Error(ErrorKind::ParseError, "unsupported layout '" + layout + "'");
  }
  if (symmetric && rows != cols) throw Error(ErrorKind::ParseError, "symmetric matrix must be square");

  Matrix m(rows, cols);
  if (layout == "coordinate") {
    for (std::size_t k = 0; k < nnz; ++k) {
      if (!next_data_line(in, line)) throw Error(ErrorKind::ParseError, "truncated coordinate entries");
      std::istringstream es(line);
      std::size_t i = 0, j = 0;
      double v = 0.0;
      if (!(es >> i >> j >> v) || i < 1 || j < 1 || i > rows || j > cols) {
        throw Error(ErrorKind::ParseError, "bad entry line: '" + line + "'");
      }
      m(i - 1, j - 1) = v;
      if (symmetric) m(j - 1, i - 1) = v;
    }
  } else {
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = symmetric ? j : 0; i < rows; ++i) {
        if (!next_data_line(in, line)) throw Error(ErrorKind::ParseError, "truncated array entries");
        double v = 0.0;
        std::istringstream es(line);
        if (!(es >> v)) throw Error(ErrorKind::ParseError, "bad value line: '" + line + "'");
        m(i, j) = v;
        if (symmetric) m(j, i) = v;
      }
    }
  }
  return m;
}

Matrix read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "' for reading");
  return read(in);
}

void write(std::ostream& out, const Matrix& m, Layout layout) { write_impl(out, m, layout, false); }
void write(std::ostream& out, const SymMatrix& m, Layout layout) { write_impl(out, m.matrix(), layout, true); }

void write_file(const std::filesystem::path& path, const Matrix& m, Layout layout) {
  write_file_impl(path, m, layout);
}
void write_file(const std::filesystem::path& path, const SymMatrix& m, Layout layout) {
  write_file_impl(path, m, layout);
}

}  // namespace itl::mm
