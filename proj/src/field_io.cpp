#include "rmrcm/field_io.hpp"

#include "rmrcm/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

namespace rmrcm {

static_assert(std::endian::native == std::endian::little,
              "field I/O assumes a little-endian host");

void write_raw_field(const std::filesystem::path& path, const RawField& field)
{
    const std::size_t n = std::size_t(field.shape[0]) * field.shape[1] * field.shape[2];
    if (n != field.values.size())
        throw FormatError("field: shape does not match value count");

    nlohmann::json header = field.meta;
    header["nx"] = field.shape[0];
    header["ny"] = field.shape[1];
    header["nz"] = field.shape[2];
    header["dtype"] = "f64le";
    header["order"] = "x-fastest";

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::string text = header.dump();
    out.write(text.data(), std::streamsize(text.size()));
    out.put('\n');
    out.write(reinterpret_cast<const char*>(field.values.data()), std::streamsize(n * sizeof(double)));
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

RawField read_raw_field(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw FormatError("field: missing header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("field: bad header: ") + e.what());
    }

    RawField field;
    try {
        field.shape = {header.at("nx").get<int>(), header.at("ny").get<int>(), header.at("nz").get<int>()};
        if (header.at("dtype").get<std::string>() != "f64le")
            throw FormatError("field: unsupported dtype");
        if (header.at("order").get<std::string>() != "x-fastest")
            throw FormatError("field: unsupported order");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("field: incomplete header: ") + e.what());
    }
    for (int a = 0; a < 3; ++a)
        if (field.shape[a] < 1)
            throw FormatError("field: resolution must be positive");

    for (auto key : {"nx", "ny", "nz", "dtype", "order"})
        header.erase(key);
    field.meta = std::move(header);

    const std::size_t n = std::size_t(field.shape[0]) * field.shape[1] * field.shape[2];
    const auto payload_start = in.tellg();
    in.seekg(0, std::ios::end);
    const auto payload_bytes = std::size_t(in.tellg() - payload_start);
    if (payload_bytes != n * sizeof(double))
        throw FormatError("field: payload holds " + std::to_string(payload_bytes) + " bytes, header implies " +
                          std::to_string(n * sizeof(double)));
    in.seekg(payload_start);
    field.values.resize(n);
    in.read(reinterpret_cast<char*>(field.values.data()), std::streamsize(n * sizeof(double)));
    if (!in)
        throw FormatError("field: short read");
    return field;
}

} // namespace rmrcm
