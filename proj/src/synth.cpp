#include "lcd/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "lcd/error.hpp"
#include "lcd/formats.hpp"
#include "lcd/rng.hpp"

namespace lcd {

void SynthConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::invalid_input, "synth config: " + msg); };
    if (image_size < 16) fail("image_size must be at least 16");
    if (!(change_rate >= 0.0 && change_rate <= 1.0)) fail("change_rate must lie in [0, 1]");
    if (jitter_max < 0 || jitter_max >= image_size / 4) fail("jitter_max must lie in [0, image_size/4)");
    if (object_size_min < 2 || object_size_min > object_size_max || object_size_max > image_size) {
        fail("object sizes must satisfy 2 <= min <= max <= image_size");
    }
    if (texture_complexity < 1 || texture_complexity > 8) fail("texture_complexity must lie in [1, 8]");
    if (!(brightness_max >= 0.0 && brightness_max < 1.0)) fail("brightness_max must lie in [0, 1)");
    if (static_shapes_min < 0 || static_shapes_min > static_shapes_max) fail("bad static shape count range");
    if (proposal_noise < 0 || distractor_proposals < 0) fail("proposal noise and distractors must be >= 0");
}

bool synth_is_positive(const SynthConfig& cfg, std::uint32_t pair_index) noexcept {
    const auto before = static_cast<std::uint64_t>(std::floor(pair_index * cfg.change_rate));
    const auto after = static_cast<std::uint64_t>(std::floor((pair_index + 1.0) * cfg.change_rate));
    return after > before;
}

std::string synth_reference_id(std::uint32_t pair_index) { return fmt::format("ref_{:04d}", pair_index); }
std::string synth_query_id(std::uint32_t pair_index) { return fmt::format("qry_{:04d}", pair_index); }

namespace {

using Rgb = std::array<std::uint8_t, 3>;

enum class ShapeKind { rect, ellipse };
enum class Pattern { solid, stripes, checker };

struct Shape {
    ShapeKind kind = ShapeKind::rect;
    Pattern pattern = Pattern::solid;
    BBox box;  // frame the shape is drawn in
    Rgb c1{};
    Rgb c2{};
    std::int32_t period = 4;
    std::int32_t ax = 1;  // stripe direction
    std::int32_t ay = 0;

    bool inside(std::int32_t x, std::int32_t y) const noexcept {
        if (!box.contains(x, y)) return false;
        if (kind == ShapeKind::rect) return true;
        // Pixel centres in doubled coordinates against the inscribed ellipse.
        const std::int64_t w = box.width(), h = box.height();
        const std::int64_t dx = 2 * (x - box.x0) + 1 - w;
        const std::int64_t dy = 2 * (y - box.y0) + 1 - h;
        return dx * dx * h * h + dy * dy * w * w <= w * w * h * h;
    }

    Rgb color(std::int32_t x, std::int32_t y) const noexcept {
        const std::int32_t u = x - box.x0, v = y - box.y0;
        switch (pattern) {
            case Pattern::solid: return c1;
            case Pattern::stripes: {
                const std::int32_t t = u * ax + v * ay + 4 * image_span;
                return ((t / period) & 1) ? c2 : c1;
            }
            case Pattern::checker: return (((u / period) + (v / period)) & 1) ? c2 : c1;
        }
        return c1;
    }

    static constexpr std::int32_t image_span = 1 << 12;  // keeps stripe coordinate non-negative
};

struct Place {
    std::uint64_t seed = 0;
    std::int32_t octaves = 4;
    std::array<std::int32_t, 3> tint{};    // /256
    std::array<std::int32_t, 3> offset{};
    std::vector<Shape> shapes;  // world frame
};

std::int32_t floor_div(std::int32_t a, std::int32_t b) noexcept {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

std::int32_t lattice(std::uint64_t seed, std::int32_t octave, std::int32_t ix, std::int32_t iy) noexcept {
    std::uint64_t h = mix64(seed, static_cast<std::uint64_t>(octave));
    h = mix64(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)));
    h = mix64(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy)));
    return static_cast<std::int32_t>(h & 0xFF);
}

// Integer value noise, `octaves` layers, result in [0, 255].
std::int32_t value_noise(const Place& place, std::int32_t x, std::int32_t y) noexcept {
    std::int64_t acc = 0, total = 0;
    for (std::int32_t o = 0; o < place.octaves; ++o) {
        const std::int32_t cell = std::max(4, 64 >> o);
        const std::int64_t amp = std::max(1, 128 >> o);
        const std::int32_t ix = floor_div(x, cell), iy = floor_div(y, cell);
        const std::int64_t fx = x - ix * cell, fy = y - iy * cell;
        const std::int64_t v00 = lattice(place.seed, o, ix, iy);
        const std::int64_t v10 = lattice(place.seed, o, ix + 1, iy);
        const std::int64_t v01 = lattice(place.seed, o, ix, iy + 1);
        const std::int64_t v11 = lattice(place.seed, o, ix + 1, iy + 1);
        const std::int64_t v = (v00 * (cell - fx) * (cell - fy) + v10 * fx * (cell - fy) +
                                v01 * (cell - fx) * fy + v11 * fx * fy) /
                               (static_cast<std::int64_t>(cell) * cell);
        acc += amp * v;
        total += amp;
    }
    return static_cast<std::int32_t>(acc / total);
}

Rgb random_color(SplitMix64& rng, std::int32_t lo, std::int32_t hi) {
    return {static_cast<std::uint8_t>(rng.between(lo, hi)), static_cast<std::uint8_t>(rng.between(lo, hi)),
            static_cast<std::uint8_t>(rng.between(lo, hi))};
}

Shape random_shape(SplitMix64& rng, BBox box, bool high_contrast) {
    Shape s;
    s.box = box;
    s.kind = rng.below(2) == 0 ? ShapeKind::rect : ShapeKind::ellipse;
    if (high_contrast) {
        s.pattern = rng.below(2) == 0 ? Pattern::stripes : Pattern::checker;
        // One saturated bright colour against a near-black one.
        s.c1 = random_color(rng, 0, 80);
        for (std::int64_t bright : {rng.between(220, 255), rng.between(200, 255)}) {
            s.c1[rng.below(3)] = static_cast<std::uint8_t>(bright);
        }
        s.c2 = random_color(rng, 0, 30);
        s.period = static_cast<std::int32_t>(rng.between(3, 8));
    } else {
        const auto p = rng.below(3);
        s.pattern = p == 0 ? Pattern::solid : (p == 1 ? Pattern::stripes : Pattern::checker);
        s.c1 = random_color(rng, 40, 200);
        s.c2 = random_color(rng, 40, 200);
        s.period = static_cast<std::int32_t>(rng.between(4, 12));
    }
    static constexpr std::array<std::array<std::int32_t, 2>, 4> dirs = {{{1, 0}, {0, 1}, {1, 1}, {1, -1}}};
    const auto& d = dirs[rng.below(4)];
    s.ax = d[0];
    s.ay = d[1];
    return s;
}

BBox random_box(SplitMix64& rng, std::int32_t frame, std::int32_t min_size, std::int32_t max_size) {
    const auto w = static_cast<std::int32_t>(rng.between(min_size, max_size));
    const auto h = static_cast<std::int32_t>(rng.between(min_size, max_size));
    const auto x0 = static_cast<std::int32_t>(rng.between(0, frame - w));
    const auto y0 = static_cast<std::int32_t>(rng.between(0, frame - h));
    return {x0, y0, x0 + w, y0 + h};
}

Place make_place(const SynthConfig& cfg, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Place place;
    place.seed = rng.next();
    place.octaves = cfg.texture_complexity;
    for (int c = 0; c < 3; ++c) {
        place.tint[c] = static_cast<std::int32_t>(rng.between(120, 230));
        place.offset[c] = static_cast<std::int32_t>(rng.between(0, 40));
    }
    const auto n = rng.between(cfg.static_shapes_min, cfg.static_shapes_max);
    const std::int32_t lo = std::max(8, cfg.image_size / 12);
    const std::int32_t hi = std::max(lo, cfg.image_size / 3);
    for (std::int64_t i = 0; i < n; ++i) {
        place.shapes.push_back(random_shape(rng, random_box(rng, cfg.image_size, lo, hi), false));
    }
    return place;
}

Rgb world_color(const Place& place, std::int32_t x, std::int32_t y) noexcept {
    for (auto it = place.shapes.rbegin(); it != place.shapes.rend(); ++it) {
        if (it->inside(x, y)) return it->color(x, y);
    }
    const std::int32_t v = value_noise(place, x, y);
    Rgb out;
    for (int c = 0; c < 3; ++c) {
        out[c] = static_cast<std::uint8_t>(std::clamp((v * place.tint[c] >> 8) + place.offset[c], 0, 255));
    }
    return out;
}

Raster render_view(const Place& place, std::int32_t size, std::int32_t dx, std::int32_t dy) {
    Raster r(size, size);
    for (std::int32_t y = 0; y < size; ++y) {
        for (std::int32_t x = 0; x < size; ++x) {
            const auto c = world_color(place, x + dx, y + dy);
            r.set(x, y, c[0], c[1], c[2]);
        }
    }
    return r;
}

BBox shifted(const BBox& b, std::int32_t dx, std::int32_t dy) noexcept {
    return {b.x0 - dx, b.y0 - dy, b.x1 - dx, b.y1 - dy};
}

std::optional<BBox> detector_box(SplitMix64& rng, const BBox& object, std::int32_t size,
                                 std::int32_t noise) {
    auto visible = intersect(object, BBox{0, 0, size, size});
    // A detector only fires on objects that are mostly in view.
    if (!visible || visible->area() * 2 < object.area() || visible->width() < 8 || visible->height() < 8) {
        return std::nullopt;
    }
    BBox b = *visible;
    b.x0 = std::clamp<std::int32_t>(b.x0 + static_cast<std::int32_t>(rng.between(-noise, noise)), 0, size - 2);
    b.y0 = std::clamp<std::int32_t>(b.y0 + static_cast<std::int32_t>(rng.between(-noise, noise)), 0, size - 2);
    b.x1 = std::clamp<std::int32_t>(b.x1 + static_cast<std::int32_t>(rng.between(-noise, noise)), b.x0 + 2, size);
    b.y1 = std::clamp<std::int32_t>(b.y1 + static_cast<std::int32_t>(rng.between(-noise, noise)), b.y0 + 2, size);
    return b;
}

double quantized_confidence(SplitMix64& rng, std::int64_t lo_milli, std::int64_t hi_milli) {
    return static_cast<double>(rng.between(lo_milli, hi_milli)) / 1000.0;
}

std::vector<Proposal> detect(SplitMix64& rng, std::span<const BBox> objects, const SynthConfig& cfg) {
    std::vector<Proposal> out;
    for (const auto& o : objects) {
        if (auto b = detector_box(rng, o, cfg.image_size, cfg.proposal_noise)) {
            out.push_back({*b, ProposalSource::external, quantized_confidence(rng, 300, 1000)});
        }
    }
    for (std::int32_t i = 0; i < cfg.distractor_proposals; ++i) {
        const BBox b = random_box(rng, cfg.image_size, cfg.image_size / 16, cfg.image_size / 2);
        out.push_back({b, ProposalSource::external, quantized_confidence(rng, 0, 300)});
    }
    return out;
}

}  // namespace

SynthPair gen_pair(const SynthConfig& cfg, std::uint32_t pair_index) {
    cfg.validate();
    const std::uint64_t pair_seed = mix64(cfg.seed, pair_index);
    const Place place = make_place(cfg, pair_seed);
    SplitMix64 rng(mix64(pair_seed, 0x51ED));

    SynthPair pair;
    pair.polarity = synth_is_positive(cfg, pair_index) ? Polarity::positive : Polarity::negative;
    const auto dx = static_cast<std::int32_t>(rng.between(-cfg.jitter_max, cfg.jitter_max));
    const auto dy = static_cast<std::int32_t>(rng.between(-cfg.jitter_max, cfg.jitter_max));
    const auto gain_span = static_cast<std::int64_t>(std::llround(cfg.brightness_max * 1024.0));
    const auto gain = 1024 + rng.between(-gain_span, gain_span);

    pair.reference = render_view(place, cfg.image_size, 0, 0);
    pair.query = render_view(place, cfg.image_size, dx, dy);

    std::vector<Shape> planted;
    if (pair.polarity == Polarity::positive) {
        const auto n = rng.between(1, 3);
        for (std::int64_t i = 0; i < n; ++i) {
            planted.push_back(random_shape(
                rng, random_box(rng, cfg.image_size, cfg.object_size_min, cfg.object_size_max), true));
        }
        for (const auto& s : planted) {
            for (std::int32_t y = s.box.y0; y < s.box.y1; ++y) {
                for (std::int32_t x = s.box.x0; x < s.box.x1; ++x) {
                    if (!s.inside(x, y)) continue;
                    const auto c = s.color(x, y);
                    pair.query.set(x, y, c[0], c[1], c[2]);
                }
            }
            pair.gt_change_boxes.push_back(s.box);
        }
    }
    if (gain != 1024) {
        for (auto& b : pair.query.bytes()) {
            b = static_cast<std::uint8_t>(std::min<std::int64_t>(255, (b * gain + 512) >> 10));
        }
    }

    std::vector<BBox> ref_objects, query_objects;
    for (const auto& s : place.shapes) {
        ref_objects.push_back(s.box);
        query_objects.push_back(shifted(s.box, dx, dy));
    }
    for (const auto& s : planted) query_objects.push_back(s.box);
    pair.reference_proposals = detect(rng, ref_objects, cfg);
    pair.query_proposals = detect(rng, query_objects, cfg);
    return pair;
}

std::vector<TestSample> gen_dataset(const SynthConfig& cfg, const std::filesystem::path& dir) {
    cfg.validate();
    const auto image_dir = dir / "images";
    std::error_code ec;
    std::filesystem::create_directories(image_dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + image_dir.string() + ": " + ec.message());

    std::vector<TestSample> samples;
    ProposalTable proposals;
    for (std::uint32_t i = 0; i < cfg.n_pairs; ++i) {
        SynthPair pair = gen_pair(cfg, i);
        const auto ref_id = synth_reference_id(i);
        const auto qry_id = synth_query_id(i);
        write_ppm(image_dir / (ref_id + ".ppm"), pair.reference);
        write_ppm(image_dir / (qry_id + ".ppm"), pair.query);
        proposals[ref_id] = std::move(pair.reference_proposals);
        proposals[qry_id] = std::move(pair.query_proposals);
        samples.push_back({qry_id, ref_id, pair.polarity, std::move(pair.gt_change_boxes)});
    }
    write_manifest(dir / "manifest.jsonl", samples);
    write_proposals_file(dir / "proposals.jsonl", proposals);
    return samples;
}

}  // namespace lcd
