// Procedural glyph corpus and scan-style degradation.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "glyphda/data.hpp"
#include "glyphda/errors.hpp"

namespace glyphda {

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return mix(a ^ mix(b)); }

struct Point {
    double x;
    double y;
};

using Stroke = std::array<Point, 3>;  // quadratic Bezier control points
using Glyph = std::vector<Stroke>;

constexpr std::uint64_t kAlphabetSeed = 0x61C0FFEEULL;

// Class shapes depend on the class index only.
Glyph class_prototype(int k) {
    std::mt19937_64 rng(mix(kAlphabetSeed, static_cast<std::uint64_t>(k)));
    std::uniform_real_distribution<double> coord(0.18, 0.82);
    std::uniform_int_distribution<int> strokes(2, 4);
    Glyph glyph(static_cast<std::size_t>(strokes(rng)));
    for (auto& stroke : glyph)
        for (auto& p : stroke) p = {coord(rng), coord(rng)};
    return glyph;
}

Glyph jitter(const Glyph& prototype, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(-0.2, 0.2);
    std::uniform_real_distribution<double> scale(0.85, 1.1);
    std::uniform_real_distribution<double> shear(-0.15, 0.15);
    std::uniform_real_distribution<double> shift(-0.06, 0.06);
    std::normal_distribution<double> wobble(0.0, 0.02);
    const double a = angle(rng), sx = scale(rng), sy = scale(rng), sh = shear(rng);
    const double tx = shift(rng), ty = shift(rng);
    const double c = std::cos(a), s = std::sin(a);
    Glyph out = prototype;
    for (auto& stroke : out)
        for (auto& p : stroke) {
            const double x = (p.x - 0.5 + wobble(rng)) * sx + sh * (p.y - 0.5);
            const double y = (p.y - 0.5 + wobble(rng)) * sy;
            p = {0.5 + c * x - s * y + tx, 0.5 + s * x + c * y + ty};
        }
    return out;
}

// Anti-aliased rasterization: intensity falls off linearly at the stroke edge.
std::vector<float> rasterize(const Glyph& glyph, int side, double width_px) {
    constexpr int kSegments = 16;
    std::vector<std::pair<Point, Point>> segments;
    for (const auto& st : glyph) {
        Point prev = st[0];
        for (int i = 1; i <= kSegments; ++i) {
            const double t = static_cast<double>(i) / kSegments, u = 1 - t;
            Point p{u * u * st[0].x + 2 * u * t * st[1].x + t * t * st[2].x,
                    u * u * st[0].y + 2 * u * t * st[1].y + t * t * st[2].y};
            segments.push_back({{prev.x * side, prev.y * side}, {p.x * side, p.y * side}});
            prev = p;
        }
    }
    std::vector<float> out(static_cast<std::size_t>(side) * side, kBackground);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            double best = 1e9;
            for (const auto& [a, b] : segments) {
                const double dx = b.x - a.x, dy = b.y - a.y;
                const double len2 = dx * dx + dy * dy;
                double t = len2 > 0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double ex = a.x + t * dx - px, ey = a.y + t * dy - py;
                best = std::min(best, ex * ex + ey * ey);
            }
            const double ink = std::clamp(width_px / 2 + 0.5 - std::sqrt(best), 0.0, 1.0);
            out[static_cast<std::size_t>(y) * side + x] = static_cast<float>(-1.0 + 2.0 * ink);
        }
    return out;
}

// Gray-level erosion (radius < 0) or dilation (radius > 0) with a square window.
void morph(std::vector<float>& plane, int side, int radius) {
    if (radius == 0) return;
    const int r = std::abs(radius);
    const bool dilate = radius > 0;
    std::vector<float> tmp(plane.size());
    auto at = [side](int y, int x) { return static_cast<std::size_t>(y) * side + x; };
    // separable: rows then columns
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            float v = plane[at(y, x)];
            for (int d = -r; d <= r; ++d) {
                const int xx = x + d;
                if (xx < 0 || xx >= side) continue;
                v = dilate ? std::max(v, plane[at(y, xx)]) : std::min(v, plane[at(y, xx)]);
            }
            tmp[at(y, x)] = v;
        }
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            float v = tmp[at(y, x)];
            for (int d = -r; d <= r; ++d) {
                const int yy = y + d;
                if (yy < 0 || yy >= side) continue;
                v = dilate ? std::max(v, tmp[at(yy, x)]) : std::min(v, tmp[at(yy, x)]);
            }
            plane[at(y, x)] = v;
        }
}

struct Rect {
    int x, y, w, h;
    bool near(const Rect& o) const {  // overlapping or touching
        return x <= o.x + o.w && o.x <= x + w && y <= o.y + o.h && o.y <= y + h;
    }
};

} // namespace

torch::Tensor apply_degradation(const torch::Tensor& image, const DegradationSpec& spec) {
    spec.validate();
    if (image.dim() != 2 && image.dim() != 3) throw ShapeError("apply_degradation expects [H, W] or [C, H, W]");
    auto input = image.detach().to(torch::kFloat).contiguous();
    const bool planar = image.dim() == 2;
    auto planes_t = planar ? input.unsqueeze(0) : input;
    const int channels = static_cast<int>(planes_t.size(0));
    const int h = static_cast<int>(planes_t.size(1));
    const int w = static_cast<int>(planes_t.size(2));
    if (h != w) throw ShapeError("apply_degradation expects square images");
    const int side = h;
    if (spec.is_identity()) return image.clone();

    std::mt19937_64 rng(mix(spec.seed, 0xDE6ADEULL));

    // Random draws are made once and shared by every channel.
    std::vector<Rect> patches;
    {
        std::uniform_int_distribution<int> count(spec.occlusion_count.lo, spec.occlusion_count.hi);
        const int n = count(rng);
        std::uniform_int_distribution<int> size(spec.occlusion_size.lo, std::max(spec.occlusion_size.lo, spec.occlusion_size.hi));
        for (int i = 0; i < n; ++i) {
            for (int attempt = 0; attempt < 64; ++attempt) {
                const int pw = std::min(size(rng), side), ph = std::min(size(rng), side);
                std::uniform_int_distribution<int> px(0, side - pw), py(0, side - ph);
                Rect r{px(rng), py(rng), pw, ph};
                if (std::none_of(patches.begin(), patches.end(), [&](const Rect& o) { return r.near(o); })) {
                    patches.push_back(r);
                    break;
                }
            }
        }
    }
    std::vector<std::int8_t> impulse(static_cast<std::size_t>(side) * side, 0);
    if (spec.salt_pepper > 0) {
        std::bernoulli_distribution flip(spec.salt_pepper), salt(0.5);
        for (auto& v : impulse)
            if (flip(rng)) v = salt(rng) ? 1 : -1;
    }
    int morph_radius = 0;
    {
        std::bernoulli_distribution apply(spec.morph_probability);
        std::uniform_int_distribution<int> radius(spec.morph_radius.lo, spec.morph_radius.hi);
        std::bernoulli_distribution dilate(0.5);
        if (apply(rng)) {
            const int r = radius(rng);
            morph_radius = dilate(rng) ? r : -r;
        }
    }
    int thickness = 0;
    if (spec.thickness_jitter > 0) {
        std::uniform_int_distribution<int> j(-spec.thickness_jitter, spec.thickness_jitter);
        thickness = j(rng);
    }
    double contrast = 1.0;
    if (spec.contrast.lo < spec.contrast.hi) {
        std::uniform_real_distribution<double> c(spec.contrast.lo, spec.contrast.hi);
        contrast = c(rng);
    } else {
        contrast = spec.contrast.lo;
    }

    auto out = planes_t.clone();
    for (int ch = 0; ch < channels; ++ch) {
        auto plane_t = out[ch].contiguous();
        std::vector<float> plane(plane_t.data_ptr<float>(), plane_t.data_ptr<float>() + plane_t.numel());
        for (const auto& r : patches)
            for (int y = r.y; y < r.y + r.h; ++y)
                for (int x = r.x; x < r.x + r.w; ++x) plane[static_cast<std::size_t>(y) * side + x] = kBackground;
        for (std::size_t i = 0; i < plane.size(); ++i)
            if (impulse[i] != 0) plane[i] = impulse[i] > 0 ? 1.0f : -1.0f;
        morph(plane, side, morph_radius);
        morph(plane, side, thickness);
        if (contrast != 1.0)
            for (auto& v : plane) v = static_cast<float>(kBackground + (v - kBackground) * contrast);
        for (auto& v : plane) v = std::clamp(v, -1.0f, 1.0f);
        out[ch].copy_(torch::from_blob(plane.data(), {side, side}, torch::kFloat));
    }
    return planar ? out.squeeze(0) : out;
}

DegradationSpec default_degradation(std::uint64_t seed) {
    DegradationSpec d;
    d.occlusion_count = {1, 3};
    d.occlusion_size = {4, 8};
    d.salt_pepper = 0.04;
    d.morph_radius = {1, 1};
    d.morph_probability = 0.5;
    d.contrast = {0.5, 0.9};
    d.thickness_jitter = 0;
    d.seed = seed;
    return d;
}

SynthCorpus synth_glyph_corpus(int classes, int per_class, std::uint64_t seed, const DegradationSpec& degradation,
                               int side) {
    if (classes < 2) throw DataError("synthetic corpus needs at least 2 classes");
    if (per_class < 2) throw DataError("synthetic corpus needs at least 2 samples per class");
    if (side < 8) throw DataError("synthetic corpus side must be >= 8");
    degradation.validate();

    std::vector<Glyph> prototypes;
    for (int k = 0; k < classes; ++k) prototypes.push_back(class_prototype(k));

    const std::int64_t n = static_cast<std::int64_t>(classes) * per_class;
    auto clean = torch::empty({n, side, side, 1}, torch::kUInt8);
    auto degraded = torch::empty({n, side, side, 1}, torch::kUInt8);
    std::vector<std::int64_t> labels(static_cast<std::size_t>(n));
    const double unit = side / 32.0;
    std::uniform_real_distribution<double> width(1.6 * unit, 3.0 * unit);

    for (std::int64_t i = 0; i < n; ++i) {
        const int k = static_cast<int>(i % classes);
        labels[i] = k;
        std::mt19937_64 style_rng(mix(mix(seed, 1), static_cast<std::uint64_t>(i)));

        auto glyph = jitter(prototypes[k], style_rng);
        auto plane = rasterize(glyph, side, width(style_rng));
        auto clean_px = torch::from_blob(plane.data(), {side, side}, torch::kFloat).clone();
        clean[i] = pixels_to_bytes(clean_px.unsqueeze(0));

        // Degradation randomness comes from its own stream, disjoint from the style draw.
        DegradationSpec per_image = degradation;
        per_image.seed = mix(mix(degradation.seed, mix(seed, 2)), static_cast<std::uint64_t>(i));
        degraded[i] = pixels_to_bytes(apply_degradation(clean_px, per_image).unsqueeze(0));
    }

    std::vector<std::string> names;
    for (int k = 0; k < classes; ++k) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "glyph_%03d", k);
        names.emplace_back(buf);
    }
    SynthCorpus corpus;
    corpus.clean = {ImageSet(clean), labels, classes, names};
    corpus.degraded = {ImageSet(degraded), labels, classes, names};
    return corpus;
}

} // namespace glyphda
