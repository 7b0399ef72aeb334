#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace glyphda {

// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> bytes;
};

// Reads a PNG file, converting palette/alpha variants to gray or RGB.
// Throws DataError.
RasterImage read_png(const std::filesystem::path& path);

// Writes an 8-bit PNG. Throws IoError.
void write_png(const std::filesystem::path& path, const RasterImage& image);

bool is_supported_image(const std::filesystem::path& path);

} // namespace glyphda
