#include "lcd/image.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "lcd/error.hpp"

namespace lcd {

Raster::Raster(std::int32_t width, std::int32_t height, std::uint8_t fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3, fill) {
    if (width < 0 || height < 0) throw Error(ErrorKind::invalid_input, "negative raster size");
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

std::vector<std::uint8_t> read_pnm(const std::filesystem::path& path, const char* magic,
                                   int channels, std::int32_t& width, std::int32_t& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open image " + path.string());
    if (next_token(in) != magic) {
        throw Error(ErrorKind::format, path.string() + ": expected " + magic + " header");
    }
    try {
        width = std::stoi(next_token(in));
        height = std::stoi(next_token(in));
        if (std::stoi(next_token(in)) != 255) {
            throw Error(ErrorKind::format, path.string() + ": only maxval 255 is supported");
        }
    } catch (const std::logic_error&) {
        throw Error(ErrorKind::format, path.string() + ": malformed header");
    }
    if (width <= 0 || height <= 0) throw Error(ErrorKind::format, path.string() + ": empty image");
    std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height * channels);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (in.gcount() != static_cast<std::streamsize>(data.size())) {
        throw Error(ErrorKind::format, path.string() + ": truncated pixel data");
    }
    return data;
}

void write_pnm(const std::filesystem::path& path, const char* magic, std::int32_t width,
               std::int32_t height, std::span<const std::uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write image " + path.string());
    out << magic << '\n' << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace

Raster read_ppm(const std::filesystem::path& path) {
    std::int32_t w = 0, h = 0;
    auto data = read_pnm(path, "P6", 3, w, h);
    Raster r(w, h);
    std::copy(data.begin(), data.end(), r.bytes().begin());
    return r;
}

void write_ppm(const std::filesystem::path& path, const Raster& raster) {
    write_pnm(path, "P6", raster.width(), raster.height(), raster.bytes());
}

void write_pgm(const std::filesystem::path& path, std::int32_t width, std::int32_t height,
               std::span<const std::uint8_t> pixels) {
    if (pixels.size() != static_cast<std::size_t>(width) * height) {
        throw Error(ErrorKind::invalid_input, "graymap size does not match its dimensions");
    }
    write_pnm(path, "P5", width, height, pixels);
}

std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, std::int32_t& width,
                                   std::int32_t& height) {
    return read_pnm(path, "P5", 1, width, height);
}

}  // namespace lcd
