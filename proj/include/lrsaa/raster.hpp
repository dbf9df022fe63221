#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lrsaa {

/// Interleaved 8-bit raster, row-major, `channels` samples per pixel.
struct ImageRaster {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    ImageRaster() = default;
    ImageRaster(int w, int h, int c);

    std::size_t stride() const noexcept { return static_cast<std::size_t>(width) * channels; }
    std::uint8_t* row(int y) noexcept { return pixels.data() + static_cast<std::size_t>(y) * stride(); }
    const std::uint8_t* row(int y) const noexcept { return pixels.data() + static_cast<std::size_t>(y) * stride(); }

    bool operator==(const ImageRaster&) const = default;
};

// PNG (gray, gray+alpha, RGB, RGBA; 16-bit input is reduced to 8 bits) and
// 8-bit single-band or 3-band TIFF. Format is chosen by file signature.
ImageRaster read_raster(const std::filesystem::path& path);

// Only width/height/channels are read.
ImageRaster read_raster_header(const std::filesystem::path& path);

// Deterministic PNG encoder: fixed compression settings and no time chunk,
// so identical rasters always produce identical bytes.
void write_png(const std::filesystem::path& path, const ImageRaster& raster);

}  // namespace lrsaa
