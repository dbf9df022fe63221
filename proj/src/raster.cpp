#include "lrsaa/raster.hpp"

#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>

#include <png.h>
#include <tiffio.h>

#include "lrsaa/error.hpp"

namespace lrsaa {

ImageRaster::ImageRaster(int w, int h, int c)
    : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, 0) {
    if (w < 0 || h < 0 || c < 1 || c > 4) throw ValidationError("raster: bad dimensions");
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

enum class Format { png, tiff, unknown };

// Decode failures surface as IoError; keep libpng quiet on stderr.
void png_quiet_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }
void png_quiet_warning(png_structp, png_const_charp) {}

Format sniff(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open raster '" + path.string() + "'");
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    if (in.gcount() >= 8 && png_sig_cmp(sig, 0, 8) == 0) return Format::png;
    if (in.gcount() >= 4 && ((sig[0] == 'I' && sig[1] == 'I' && sig[2] == 42 && sig[3] == 0) ||
                             (sig[0] == 'M' && sig[1] == 'M' && sig[2] == 0 && sig[3] == 42)))
        return Format::tiff;
    return Format::unknown;
}

ImageRaster read_png(const std::filesystem::path& path, bool header_only) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open '" + path.string() + "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_quiet_error, png_quiet_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialisation failed");
    }

    ImageRaster out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("PNG decode failed for '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int c = png_get_channels(png, info);
    if (header_only) {
        out.width = w;
        out.height = h;
        out.channels = c;
        png_destroy_read_struct(&png, &info, nullptr);
        return out;
    }
    out = ImageRaster(w, h, c);
    rows.resize(h);
    for (int y = 0; y < h; ++y) rows[y] = out.row(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void silence_tiff(const char*, const char*, va_list) {}

ImageRaster read_tiff(const std::filesystem::path& path, bool header_only) {
    TIFFSetWarningHandler(silence_tiff);
    TIFFSetErrorHandler(silence_tiff);
    std::unique_ptr<TIFF, void (*)(TIFF*)> tif(TIFFOpen(path.c_str(), "r"), TIFFClose);
    if (!tif) throw IoError("cannot open TIFF '" + path.string() + "'");

    std::uint32_t w = 0, h = 0;
    std::uint16_t spp = 1, bps = 8, planar = PLANARCONFIG_CONTIG, format = SAMPLEFORMAT_UINT;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bps);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &format);
    if (bps != 8 || format != SAMPLEFORMAT_UINT || (spp != 1 && spp != 3))
        throw IoError("unsupported TIFF '" + path.string() + "': need 8-bit unsigned, 1 or 3 bands");
    if (header_only) {
        ImageRaster out;
        out.width = static_cast<int>(w);
        out.height = static_cast<int>(h);
        out.channels = spp;
        return out;
    }

    ImageRaster out(static_cast<int>(w), static_cast<int>(h), spp);
    if (TIFFIsTiled(tif.get())) {
        // Decode through the RGBA path, then drop the channels we do not keep.
        std::vector<std::uint32_t> rgba(static_cast<std::size_t>(w) * h);
        if (!TIFFReadRGBAImageOriented(tif.get(), w, h, rgba.data(), ORIENTATION_TOPLEFT, 0))
            throw IoError("TIFF decode failed for '" + path.string() + "'");
        for (std::size_t i = 0; i < rgba.size(); ++i) {
            if (spp == 1) {
                out.pixels[i] = static_cast<std::uint8_t>(TIFFGetR(rgba[i]));
            } else {
                out.pixels[3 * i] = static_cast<std::uint8_t>(TIFFGetR(rgba[i]));
                out.pixels[3 * i + 1] = static_cast<std::uint8_t>(TIFFGetG(rgba[i]));
                out.pixels[3 * i + 2] = static_cast<std::uint8_t>(TIFFGetB(rgba[i]));
            }
        }
        return out;
    }

    if (planar == PLANARCONFIG_CONTIG || spp == 1) {
        for (std::uint32_t y = 0; y < h; ++y)
            if (TIFFReadScanline(tif.get(), out.row(static_cast<int>(y)), y, 0) < 0)
                throw IoError("TIFF decode failed for '" + path.string() + "'");
        return out;
    }

    std::vector<std::uint8_t> line(w);
    for (std::uint16_t s = 0; s < spp; ++s) {
        for (std::uint32_t y = 0; y < h; ++y) {
            if (TIFFReadScanline(tif.get(), line.data(), y, s) < 0)
                throw IoError("TIFF decode failed for '" + path.string() + "'");
            std::uint8_t* row = out.row(static_cast<int>(y));
            for (std::uint32_t x = 0; x < w; ++x) row[x * spp + s] = line[x];
        }
    }
    return out;
}

ImageRaster read_any(const std::filesystem::path& path, bool header_only) {
    switch (sniff(path)) {
        case Format::png:
            return read_png(path, header_only);
        case Format::tiff:
            return read_tiff(path, header_only);
        case Format::unknown:
            break;
    }
    throw IoError("unrecognised raster format '" + path.string() + "' (expected PNG or TIFF)");
}

}  // namespace

ImageRaster read_raster(const std::filesystem::path& path) { return read_any(path, false); }

ImageRaster read_raster_header(const std::filesystem::path& path) { return read_any(path, true); }

void write_png(const std::filesystem::path& path, const ImageRaster& raster) {
    if (raster.width < 1 || raster.height < 1) throw IoError("cannot write empty raster to '" + path.string() + "'");
    int color = 0;
    switch (raster.channels) {
        case 1: color = PNG_COLOR_TYPE_GRAY; break;
        case 2: color = PNG_COLOR_TYPE_GRAY_ALPHA; break;
        case 3: color = PNG_COLOR_TYPE_RGB; break;
        case 4: color = PNG_COLOR_TYPE_RGBA; break;
        default: throw IoError("unsupported channel count for PNG");
    }

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot create '" + path.string() + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialisation failed");
    }
    std::vector<png_bytep> rows(raster.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed for '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
    png_set_IHDR(png, info, raster.width, raster.height, 8, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < raster.height; ++y) rows[y] = const_cast<png_bytep>(raster.row(y));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(fp.get()) != 0) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace lrsaa
