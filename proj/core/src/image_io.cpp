#include "glyphda/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <string>

#include "glyphda/errors.hpp"

namespace glyphda {

RasterImage read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw DataError("unreadable image " + path.string() + ": " + image.message);

    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    RasterImage out;
    out.width = static_cast<int>(image.width);
    out.height = static_cast<int>(image.height);
    out.channels = color ? 3 : 1;
    out.bytes.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.bytes.data(), 0, nullptr)) {
        std::string message = image.message;
        png_image_free(&image);
        throw DataError("unreadable image " + path.string() + ": " + message);
    }
    return out;
}

void write_png(const std::filesystem::path& path, const RasterImage& raster) {
    if (raster.channels != 1 && raster.channels != 3)
        throw IoError("write_png: unsupported channel count " + std::to_string(raster.channels));
    if (raster.bytes.size() != static_cast<std::size_t>(raster.width) * raster.height * raster.channels)
        throw IoError("write_png: byte count does not match dimensions");

    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(raster.width);
    image.height = static_cast<png_uint_32>(raster.height);
    image.format = raster.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, raster.bytes.data(), 0, nullptr))
        throw IoError("cannot write " + path.string() + ": " + image.message);
}

bool is_supported_image(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

} // namespace glyphda
