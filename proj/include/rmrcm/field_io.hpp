#pragma once

#include "rmrcm/grid.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <vector>

namespace rmrcm {

/// A 3D array of doubles in the on-disk field format: one line of JSON
/// header `{"nx":..,"ny":..,"nz":..,"dtype":"f64le","order":"x-fastest",...}`
/// terminated by '\n', followed by nx*ny*nz little-endian doubles.
struct RawField {
    Index3 shape{0, 0, 0};
    std::vector<double> values;
    /// Extra header keys, written verbatim next to the required ones.
    nlohmann::json meta = nlohmann::json::object();
};

void write_raw_field(const std::filesystem::path& path, const RawField& field);

/// Throws FormatError on a bad header, zero resolution, or payload size
/// mismatch.
RawField read_raw_field(const std::filesystem::path& path);

} // namespace rmrcm
