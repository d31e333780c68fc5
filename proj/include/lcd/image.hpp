#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lcd {

/// 8-bit interleaved RGB raster, row-major.
class Raster {
public:
    Raster() = default;
    Raster(std::int32_t width, std::int32_t height, std::uint8_t fill = 0);

    std::int32_t width() const noexcept { return width_; }
    std::int32_t height() const noexcept { return height_; }
    bool empty() const noexcept { return width_ == 0 || height_ == 0; }

    std::uint8_t* pixel(std::int32_t x, std::int32_t y) noexcept {
        return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
    }
    const std::uint8_t* pixel(std::int32_t x, std::int32_t y) const noexcept {
        return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
    }
    void set(std::int32_t x, std::int32_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
        auto* p = pixel(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }

    std::span<const std::uint8_t> bytes() const noexcept { return data_; }
    std::span<std::uint8_t> bytes() noexcept { return data_; }

    bool operator==(const Raster&) const = default;

private:
    std::int32_t width_ = 0;
    std::int32_t height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Binary PPM (P6, maxval 255).
Raster read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Raster& raster);

/// Binary PGM (P5, maxval 255); `pixels` is row-major, width*height bytes.
void write_pgm(const std::filesystem::path& path, std::int32_t width, std::int32_t height,
               std::span<const std::uint8_t> pixels);
std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, std::int32_t& width,
                                   std::int32_t& height);

}  // namespace lcd
