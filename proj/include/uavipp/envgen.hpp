#pragma once

#include "uavipp/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace uavipp {

// 8-bit grayscale raster.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Reads binary/ASCII PGM (P5/P2) or 8-bit PNG, chosen by file contents.
GrayImage read_gray_image(const std::filesystem::path& path);
// Writes PNG when the extension is .png, binary PGM otherwise.
void write_gray_image(const std::filesystem::path& path, const GrayImage& image);

enum class GeneratorKind { star_blobs };

struct SyntheticEnvSpec {
    GeneratorKind kind = GeneratorKind::star_blobs;
    int width = 30;
    int height = 30;
    int shape_count = 3;
    std::uint64_t seed = 7;
    friend bool operator==(const SyntheticEnvSpec&, const SyntheticEnvSpec&) = default;
};

// Randomised star-shaped valuable regions. Deterministic in the spec.
// Throws ConfigError for zero shapes or empty grids.
GroundTruthGrid generate_star_blobs(const SyntheticEnvSpec& spec);

// 0 = valuable, 255 = valueless.
GrayImage to_gray_image(const GroundTruthGrid& truth);

// Generates the grid and, when `image_path` is set, writes it as an image.
GroundTruthGrid gen_env(const SyntheticEnvSpec& spec, const std::optional<std::filesystem::path>& image_path = {});

struct LoadEnvOptions {
    int threshold = 128;
    bool bright_is_valuable = false;  // thermal white-hot imagery
    std::optional<std::filesystem::path> mask_path;  // bright mask pixels (> 127) are no-fly
    int downsample = 1;                               // integer factor, strict-majority pooling
};

// Dark pixels (< threshold) are valuable unless `bright_is_valuable` flips the
// polarity (>= threshold). No-fly cells are forced valueless.
GroundTruthGrid load_env(const std::filesystem::path& image_path, const LoadEnvOptions& options);

} // namespace uavipp
