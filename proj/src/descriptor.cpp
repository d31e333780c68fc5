#include "lcd/descriptor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lcd/error.hpp"

namespace lcd {

void DescriptorConfig::validate() const {
    if (builtin_grid < 1 || canonical_size < builtin_grid) {
        throw Error(ErrorKind::invalid_input,
                    "descriptor config needs canonical_size >= builtin_grid >= 1");
    }
}

namespace {

template <typename T>
FeatureVector normalize_impl(std::span<const T> v) {
    double sq = 0.0;
    for (T x : v) sq += static_cast<double>(x) * static_cast<double>(x);
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw Error(ErrorKind::degenerate_input, "cannot normalize a zero-norm vector");
    }
    FeatureVector out;
    out.values.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.values[i] = static_cast<float>(static_cast<double>(v[i]) / norm);
    }
    return out;
}

struct Tap {
    std::int32_t lo;
    std::int32_t hi;
    double t;
};

// Half-pixel-centre bilinear taps, clamped at the borders.
std::vector<Tap> bilinear_taps(std::int32_t src, std::int32_t dst) {
    std::vector<Tap> taps(static_cast<std::size_t>(dst));
    const double scale = static_cast<double>(src) / dst;
    for (std::int32_t i = 0; i < dst; ++i) {
        double s = (i + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(src - 1));
        auto lo = static_cast<std::int32_t>(std::floor(s));
        auto hi = std::min(lo + 1, src - 1);
        taps[static_cast<std::size_t>(i)] = {lo, hi, s - lo};
    }
    return taps;
}

}  // namespace

FeatureVector l2_normalize(std::span<const double> v) { return normalize_impl(v); }
FeatureVector l2_normalize(std::span<const float> v) { return normalize_impl(v); }

double l2_norm(std::span<const float> v) noexcept {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    return std::sqrt(sq);
}

FeatureVector extract_builtin(const Raster& image, const BBox& box, const DescriptorConfig& cfg) {
    cfg.validate();
    if (!box.within(image.width(), image.height())) {
        throw Error(ErrorKind::invalid_input, "descriptor box lies outside the image");
    }
    const auto cw = static_cast<std::int32_t>(box.width());
    const auto ch = static_cast<std::int32_t>(box.height());

    std::vector<double> gray(static_cast<std::size_t>(cw) * ch);
    for (std::int32_t y = 0; y < ch; ++y) {
        for (std::int32_t x = 0; x < cw; ++x) {
            const auto* p = image.pixel(box.x0 + x, box.y0 + y);
            gray[static_cast<std::size_t>(y) * cw + x] = (p[0] + p[1] + p[2]) / 3.0;
        }
    }

    const std::int32_t size = cfg.canonical_size;
    const auto xt = bilinear_taps(cw, size);
    const auto yt = bilinear_taps(ch, size);

    // Horizontal pass into a ch x size buffer, then vertical pass per output row.
    std::vector<double> horiz(static_cast<std::size_t>(ch) * size);
    for (std::int32_t y = 0; y < ch; ++y) {
        const double* row = gray.data() + static_cast<std::size_t>(y) * cw;
        double* out = horiz.data() + static_cast<std::size_t>(y) * size;
        for (std::int32_t x = 0; x < size; ++x) {
            const auto& tap = xt[static_cast<std::size_t>(x)];
            const double a = row[tap.lo];
            out[x] = a + tap.t * (row[tap.hi] - a);
        }
    }

    const std::int32_t grid = cfg.builtin_grid;
    std::vector<double> cells(static_cast<std::size_t>(grid) * grid, 0.0);
    std::vector<std::int32_t> cell_of(static_cast<std::size_t>(size));
    for (std::int32_t i = 0; i < size; ++i) {
        cell_of[static_cast<std::size_t>(i)] =
            static_cast<std::int32_t>(static_cast<std::int64_t>(i) * grid / size);
    }
    for (std::int32_t y = 0; y < size; ++y) {
        const auto& tap = yt[static_cast<std::size_t>(y)];
        const double* lo = horiz.data() + static_cast<std::size_t>(tap.lo) * size;
        const double* hi = horiz.data() + static_cast<std::size_t>(tap.hi) * size;
        double* cell_row = cells.data() + static_cast<std::size_t>(cell_of[static_cast<std::size_t>(y)]) * grid;
        for (std::int32_t x = 0; x < size; ++x) {
            const double a = lo[x];
            cell_row[cell_of[static_cast<std::size_t>(x)]] += a + tap.t * (hi[x] - a);
        }
    }
    for (std::int32_t cy = 0; cy < grid; ++cy) {
        // Pixels i with floor(i*grid/size) == c: [ceil(c*size/grid), ceil((c+1)*size/grid)).
        const std::int64_t hy = (static_cast<std::int64_t>(cy + 1) * size + grid - 1) / grid -
                                (static_cast<std::int64_t>(cy) * size + grid - 1) / grid;
        for (std::int32_t cx = 0; cx < grid; ++cx) {
            const std::int64_t hx = (static_cast<std::int64_t>(cx + 1) * size + grid - 1) / grid -
                                    (static_cast<std::int64_t>(cx) * size + grid - 1) / grid;
            cells[static_cast<std::size_t>(cy) * grid + cx] /= static_cast<double>(hx * hy);
        }
    }
    return l2_normalize(std::span<const double>(cells));
}

// ---------------------------------------------------------------------------

const FeatureVector* FeatureTable::find(const std::string& image_id, const BBox& box) const {
    auto it = features.find(FeatureKey{image_id, box});
    return it == features.end() ? nullptr : &it->second;
}

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class ByteReader {
public:
    ByteReader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(ErrorKind::format,
                    name_ + ": " + msg + " at byte offset " + std::to_string(pos_));
    }

private:
    void need(std::size_t n, const char* what) const {
        if (data_.size() - pos_ < n) fail(std::string("truncated ") + what);
    }

    std::string data_;
    std::string name_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_feature_file(const std::filesystem::path& path, std::uint32_t dimension,
                        std::span<const FeatureRecord> records) {
    std::string buf(kFeatureMagic, sizeof kFeatureMagic);
    put_u32(buf, dimension);
    put_u32(buf, static_cast<std::uint32_t>(records.size()));
    for (const auto& rec : records) {
        if (rec.feature.dimension() != dimension) {
            throw Error(ErrorKind::format, "feature record for '" + rec.key.image_id +
                                               "' has dimension " +
                                               std::to_string(rec.feature.dimension()) +
                                               ", expected " + std::to_string(dimension));
        }
        put_u32(buf, static_cast<std::uint32_t>(rec.key.image_id.size()));
        buf += rec.key.image_id;
        for (std::int32_t c : {rec.key.box.x0, rec.key.box.y0, rec.key.box.x1, rec.key.box.y1}) {
            put_u32(buf, static_cast<std::uint32_t>(c));
        }
        for (float f : rec.feature.values) put_u32(buf, std::bit_cast<std::uint32_t>(f));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write feature file " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

FeatureFile read_feature_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open feature file " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ByteReader r(std::move(data), path.string());

    if (r.bytes(8, "magic") != std::string(kFeatureMagic, 8)) {
        r.fail("bad magic (expected RLFEAT01)");
    }
    FeatureFile file;
    file.dimension = r.u32("dimension");
    const std::uint32_t count = r.u32("record count");
    if (file.dimension == 0) r.fail("zero feature dimension");
    file.records.reserve(std::min<std::size_t>(count, r.remaining() / (16 + 4ull * file.dimension) + 1));
    for (std::uint32_t i = 0; i < count; ++i) {
        FeatureRecord rec;
        const std::uint32_t len = r.u32("record id length");
        rec.key.image_id = r.bytes(len, "record id");
        rec.key.box.x0 = r.i32("record box");
        rec.key.box.y0 = r.i32("record box");
        rec.key.box.x1 = r.i32("record box");
        rec.key.box.y1 = r.i32("record box");
        if (!rec.key.box.valid()) r.fail("record box with non-positive area");
        rec.feature.values.resize(file.dimension);
        for (auto& f : rec.feature.values) f = r.f32("feature values (dimension mismatch?)");
        file.records.push_back(std::move(rec));
    }
    if (r.remaining() != 0) r.fail("trailing bytes after last record (dimension mismatch?)");
    return file;
}

FeatureTable load_external_features(const std::filesystem::path& path) {
    FeatureFile file = read_feature_file(path);
    FeatureTable table;
    table.dimension = file.dimension;
    for (auto& rec : file.records) {
        auto normalized = l2_normalize(std::span<const float>(rec.feature.values));
        auto [it, inserted] = table.features.emplace(std::move(rec.key), std::move(normalized));
        if (!inserted) {
            throw Error(ErrorKind::format, path.string() + ": duplicate feature record for '" +
                                               it->first.image_id + "'");
        }
    }
    return table;
}

}  // namespace lcd
