#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace uavipp {

// Little-endian float32 array in NumPy .npy format (version 1.0, C order).
void write_npy(const std::filesystem::path& path, std::span<const float> data, const std::vector<std::int64_t>& shape);

} // namespace uavipp
