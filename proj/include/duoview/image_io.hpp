#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include <png.h>

#include "duoview/core.hpp"

namespace duoview {

namespace detail {

inline int pnm_read_token(std::istream& in) {
    // skips whitespace and '#' comments
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v = 0;
    in >> v;
    return v;
}

inline float u8_to_unit(unsigned char v) { return static_cast<float>(v) / 255.0f; }
inline unsigned char unit_to_u8(float v) {
    float s = v * 255.0f + 0.5f;
    if (s < 0.0f) s = 0.0f;
    if (s > 255.0f) s = 255.0f;
    return static_cast<unsigned char>(s);
}

}  // namespace detail

/// Binary PGM (P5) / PPM (P6), 8-bit.
inline void save_pnm(const Frame& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_pnm: cannot open " + path);
    out << (f.channels == 1 ? "P5" : "P6") << "\n"
        << f.width << " " << f.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(f.width) * f.channels);
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x)
            for (int c = 0; c < f.channels; ++c)
                row[static_cast<std::size_t>(x) * f.channels + c] =
                    detail::unit_to_u8(f.at(x, y, c));
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!out) throw std::runtime_error("save_pnm: write failed for " + path);
}

inline Frame load_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_pnm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6")
        throw std::runtime_error("load_pnm: unsupported magic '" + magic + "' in " + path);
    int channels = (magic == "P5") ? 1 : 3;
    int w = detail::pnm_read_token(in);
    int h = detail::pnm_read_token(in);
    int maxval = detail::pnm_read_token(in);
    if (w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("load_pnm: bad header in " + path);
    in.get();  // single whitespace before raster
    Frame f(w, h, channels);
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * channels);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!in) throw std::runtime_error("load_pnm: truncated raster in " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                f.at(x, y, c) = detail::u8_to_unit(row[static_cast<std::size_t>(x) * channels + c]);
    }
    return f;
}

/// Masks round-trip as PGM with {0,255}.
inline void save_mask_pgm(const BinaryMask& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_mask_pgm: cannot open " + path);
    out << "P5\n" << m.width() << " " << m.height() << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(m.width()));
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) row[x] = m.at(x, y) ? 255 : 0;
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

inline BinaryMask load_mask_pgm(const std::string& path) {
    Frame f = load_pnm(path);
    if (f.channels != 1) throw std::runtime_error("load_mask_pgm: expected PGM: " + path);
    BinaryMask m(f.width, f.height);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            if (f.at(x, y) >= 0.5f) m.set(x, y);
    return m;
}

inline void save_png(const Frame& f, const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("save_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("save_png: libpng failure for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, f.width, f.height, 8,
                 f.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(static_cast<std::size_t>(f.width) * f.channels);
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x)
            for (int c = 0; c < f.channels; ++c)
                row[static_cast<std::size_t>(x) * f.channels + c] =
                    detail::unit_to_u8(f.at(x, y, c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline Frame load_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("load_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("load_png: libpng failure for " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    int w = static_cast<int>(png_get_image_width(png, info));
    int h = static_cast<int>(png_get_image_height(png, info));
    int ch = static_cast<int>(png_get_channels(png, info));
    if (ch != 1 && ch != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("load_png: unsupported channel count in " + path);
    }
    Frame f(w, h, ch);
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * ch);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c)
                f.at(x, y, c) = detail::u8_to_unit(row[static_cast<std::size_t>(x) * ch + c]);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return f;
}

/// Dispatch on extension: .pgm/.ppm/.pnm or .png.
inline Frame load_image(const std::string& path) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".png") return load_png(path);
    return load_pnm(path);
}

inline void save_image(const Frame& f, const std::string& path) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".png")
        save_png(f, path);
    else
        save_pnm(f, path);
}

}  // namespace duoview
