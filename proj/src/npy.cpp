#include "uavipp/npy.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace uavipp {

void write_npy(const std::filesystem::path& path, std::span<const float> data, const std::vector<std::int64_t>& shape)
{
    std::int64_t count = 1;
    std::string dims;
    for (auto d : shape) {
        count *= d;
        dims += std::to_string(d) + ", ";
    }
    if (static_cast<std::size_t>(count) != data.size()) {
        throw std::invalid_argument("write_npy: shape does not match data size");
    }
    if (shape.size() > 1) {
        dims.resize(dims.size() - 1);  // drop the trailing space, keep "," only for 1-d tuples
        dims.pop_back();
    }
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + dims + "), }";
    // Magic (6) + version (2) + header length (2) + header + '\n', padded to 64 bytes.
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write("\x93NUMPY\x01\x00", 8);
    const auto len = static_cast<std::uint16_t>(header.size());
    const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
    out.write(len_bytes, 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
}

} // namespace uavipp
