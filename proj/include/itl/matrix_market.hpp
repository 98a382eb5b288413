#pragma once

#include <filesystem>
#include <iosfwd>

#include "itl/matrix.hpp"

namespace itl::mm {

enum class Layout { Coordinate, Array };

/// Reads `%%MatrixMarket matrix {coordinate|array} {real|integer} {general|symmetric}`.
/// Symmetric files are expanded to full storage.
Matrix read(std::istream& in);
Matrix read_file(const std::filesystem::path& path);

/// General (non-symmetric) header; coordinate layout lists nonzeros only.
void write(std::ostream& out, const Matrix& m, Layout layout = Layout::Coordinate);
/// Symmetric header; only the lower triangle is stored.
void write(std::ostream& out, const SymMatrix& m, Layout layout = Layout::Coordinate);

void write_file(const std::filesystem::path& path, const Matrix& m, Layout layout = Layout::Coordinate);
void write_file(const std::filesystem::path& path, const SymMatrix& m, Layout layout = Layout::Coordinate);

}  // namespace itl::mm
