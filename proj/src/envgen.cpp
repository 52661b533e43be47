#include "uavipp/envgen.hpp"

#include "uavipp/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace uavipp {

namespace {

bool has_png_signature(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

GrayImage read_png(const std::filesystem::path& path)
{
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
        throw ConfigError("cannot read PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_GRAY;
    GrayImage out;
    out.width = static_cast<int>(img.width);
    out.height = static_cast<int>(img.height);
    out.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&img);
        throw ConfigError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    return out;
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in)
{
    std::string tok;
    int c = 0;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) {
                break;
            }
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

GrayImage read_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open image " + path.string());
    }
    const std::string magic = pgm_token(in);
    if (magic != "P5" && magic != "P2") {
        throw ConfigError(path.string() + " is neither PNG nor PGM (P2/P5)");
    }
    GrayImage out;
    int maxval = 0;
    try {
        out.width = std::stoi(pgm_token(in));
        out.height = std::stoi(pgm_token(in));
        maxval = std::stoi(pgm_token(in));
    } catch (const std::exception&) {
        throw ConfigError("malformed PGM header in " + path.string());
    }
    if (out.width <= 0 || out.height <= 0 || maxval <= 0 || maxval > 255) {
        throw ConfigError("unsupported PGM (need 8-bit grayscale): " + path.string());
    }
    const auto n = static_cast<std::size_t>(out.width) * out.height;
    out.pixels.resize(n);
    if (magic == "P5") {
        in.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) {
            throw ConfigError("truncated PGM data in " + path.string());
        }
    } else {
        for (auto& px : out.pixels) {
            const std::string tok = pgm_token(in);
            if (tok.empty()) {
                throw ConfigError("truncated PGM data in " + path.string());
            }
            px = static_cast<std::uint8_t>(std::stoi(tok));
        }
    }
    if (maxval != 255) {
        for (auto& px : out.pixels) {
            px = static_cast<std::uint8_t>(std::lround(px * 255.0 / maxval));
        }
    }
    return out;
}

// Even-odd ray cast.
bool inside_polygon(double px, double py, const std::vector<std::pair<double, double>>& poly)
{
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto [xi, yi] = poly[i];
        const auto [xj, yj] = poly[j];
        if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi) {
            inside = !inside;
        }
    }
    return inside;
}

} // namespace

GrayImage read_gray_image(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) {
        throw ConfigError("image file not found: " + path.string());
    }
    return has_png_signature(path) ? read_png(path) : read_pgm(path);
}

void write_gray_image(const std::filesystem::path& path, const GrayImage& image)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    if (path.extension() == ".png") {
        png_image img{};
        img.version = PNG_IMAGE_VERSION;
        img.width = static_cast<png_uint_32>(image.width);
        img.height = static_cast<png_uint_32>(image.height);
        img.format = PNG_FORMAT_GRAY;
        if (!png_image_write_to_file(&img, path.string().c_str(), 0, image.pixels.data(), 0, nullptr)) {
            throw std::runtime_error("cannot write PNG " + path.string() + ": " + img.message);
        }
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

GroundTruthGrid generate_star_blobs(const SyntheticEnvSpec& spec)
{
    if (spec.shape_count < 1) {
        throw ConfigError("synthetic environment needs at least one shape");
    }
    if (spec.width < 4 || spec.height < 4) {
        throw ConfigError("synthetic environment needs at least a 4x4 grid");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double side = std::min(spec.width, spec.height);
    GroundTruthGrid truth(spec.width, spec.height);

    for (int s = 0; s < spec.shape_count; ++s) {
        const double cx = spec.width * (0.15 + 0.7 * unit(rng));
        const double cy = spec.height * (0.15 + 0.7 * unit(rng));
        const double outer = side * (0.12 + 0.13 * unit(rng));
        const double inner_ratio = 0.35 + 0.25 * unit(rng);
        const int points = 5 + static_cast<int>(unit(rng) * 3.0);
        const double rotation = 2.0 * std::numbers::pi * unit(rng);
        std::vector<std::pair<double, double>> poly;
        for (int v = 0; v < 2 * points; ++v) {
            const double jitter = 0.75 + 0.5 * unit(rng);
            const double r = (v % 2 == 0 ? outer : outer * inner_ratio) * jitter;
            const double ang = rotation + std::numbers::pi * v / points;
            poly.emplace_back(cx + r * std::cos(ang), cy + r * std::sin(ang));
        }
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                if (inside_polygon(x + 0.5, y + 0.5, poly)) {
                    truth.set_label(x, y, 1);
                }
            }
        }
        truth.set_label(std::clamp(static_cast<int>(cx), 0, spec.width - 1),
                        std::clamp(static_cast<int>(cy), 0, spec.height - 1), 1);
    }
    return truth;
}

GrayImage to_gray_image(const GroundTruthGrid& truth)
{
    GrayImage img;
    img.width = truth.width();
    img.height = truth.height();
    img.pixels.reserve(truth.size());
    for (auto label : truth.labels()) {
        img.pixels.push_back(label ? 0 : 255);
    }
    return img;
}

GroundTruthGrid gen_env(const SyntheticEnvSpec& spec, const std::optional<std::filesystem::path>& image_path)
{
    GroundTruthGrid truth = generate_star_blobs(spec);
    truth.validate();
    if (image_path) {
        write_gray_image(*image_path, to_gray_image(truth));
    }
    return truth;
}

GroundTruthGrid load_env(const std::filesystem::path& image_path, const LoadEnvOptions& options)
{
    if (options.downsample < 1) {
        throw ConfigError("downsample factor must be >= 1");
    }
    const GrayImage img = read_gray_image(image_path);
    std::optional<GrayImage> mask;
    if (options.mask_path) {
        mask = read_gray_image(*options.mask_path);
        if (mask->width != img.width || mask->height != img.height) {
            throw ConfigError("mask dimensions do not match the environment image");
        }
    }
    const int f = options.downsample;
    const int width = img.width / f;
    const int height = img.height / f;
    if (width < 1 || height < 1) {
        throw ConfigError("downsample factor larger than the image");
    }
    GroundTruthGrid truth(width, height);
    const int votes_needed = f * f / 2 + 1;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            int valuable = 0, blocked = 0;
            for (int dy = 0; dy < f; ++dy) {
                for (int dx = 0; dx < f; ++dx) {
                    const int px = x * f + dx, py = y * f + dy;
                    const int v = img.at(px, py);
                    valuable += options.bright_is_valuable ? v >= options.threshold : v < options.threshold;
                    if (mask) {
                        blocked += mask->at(px, py) > 127;
                    }
                }
            }
            const bool no_fly = blocked >= votes_needed;
            truth.set_no_fly(x, y, no_fly);
            truth.set_label(x, y, (!no_fly && valuable >= votes_needed) ? 1 : 0);
        }
    }
    truth.validate();
    return truth;
}

} // namespace uavipp
