#pragma once

// .vgrid files: one line of JSON metadata, then the value slices and the
// control slices as little-endian float64 in row-major node order.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>

#include "qfc/bellman_solver.hpp"

namespace qfc {

/// Malformed or inconsistent .vgrid content.
class FormatError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_value_grid(std::ostream& os, const ValueGrid& vg);
ValueGrid read_value_grid(std::istream& is);

void save_value_grid(const ValueGrid& vg, const std::filesystem::path& path);
ValueGrid load_value_grid(const std::filesystem::path& path);

/// Writes through `fill` into a sibling temporary file, then renames it over
/// `path`. The temporary file is removed if `fill` throws.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill);

} // namespace qfc
