#include "coopdiff/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace coopdiff {

namespace {

constexpr int supersample = 4;

// Confidence scaling: a correlation margin at or above this maps to 1.0.
// Calibrated against the clean-generator sweep, whose smallest observed
// margin is comfortably above it (see docs/calibration.md).
constexpr double full_confidence_margin = 0.02;

// Mass threshold separating shape pixels from background + texture.
constexpr double background_threshold = 0.25;
constexpr double min_total_mass = 2.0;

struct quadrant_geom {
    int x0, y0, w, h;
    double cx, cy;
};

quadrant_geom quadrant_region(int q, const tensor_shape& shape) {
    int hw = shape.width / 2;
    int hh = shape.height / 2;
    int qx = q % 2;
    int qy = q / 2;
    quadrant_geom g;
    g.x0 = qx * hw;
    g.y0 = qy * hh;
    g.w = hw;
    g.h = hh;
    g.cx = g.x0 + hw / 2.0;
    g.cy = g.y0 + hh / 2.0;
    return g;
}

// Signed inside-test for one supersample point relative to the shape center.
bool point_inside(shape_class cls, double dx, double dy, double size) {
    switch (cls) {
        case shape_class::circle:
            return dx * dx + dy * dy <= size * size;
        case shape_class::square:
            return std::abs(dx) <= size && std::abs(dy) <= size;
        case shape_class::triangle: {
            // Upward-pointing triangle: apex at (0, -size), base at y = +0.75*size
            // spanning x in [-0.9*size, +0.9*size].
            double top = -size;
            double bottom = 0.75 * size;
            if (dy < top || dy > bottom) return false;
            double frac = (dy - top) / (bottom - top);  // 0 at apex, 1 at base
            double half_width = 0.9 * size * frac;
            return std::abs(dx) <= half_width;
        }
    }
    return false;
}

// Anti-aliased coverage of one pixel, supersampled on a regular grid.
double pixel_coverage(shape_class cls, double px, double py, double cx, double cy, double size) {
    int hit = 0;
    for (int sy = 0; sy < supersample; ++sy) {
        for (int sx = 0; sx < supersample; ++sx) {
            double x = px + (sx + 0.5) / supersample;
            double y = py + (sy + 0.5) / supersample;
            if (point_inside(cls, x - cx, y - cy, size)) ++hit;
        }
    }
    return double(hit) / (supersample * supersample);
}

void draw_shape(latent_tensor& img, shape_class cls, double cx, double cy, double size,
                double brightness) {
    const auto& sh = img.shape();
    int lo_x = std::max(0, int(std::floor(cx - size - 2)));
    int hi_x = std::min(sh.width - 1, int(std::ceil(cx + size + 2)));
    int lo_y = std::max(0, int(std::floor(cy - size - 2)));
    int hi_y = std::min(sh.height - 1, int(std::ceil(cy + size + 2)));
    for (int y = lo_y; y <= hi_y; ++y) {
        for (int x = lo_x; x <= hi_x; ++x) {
            double cov = pixel_coverage(cls, x, y, cx, cy, size);
            if (cov > 0.0) img.at(0, y, x) += brightness * cov;
        }
    }
}

double hash_noise(uint64_t seed, int x, int y) {
    uint64_t s = seed ^ (uint64_t(x) * 0x9e3779b97f4a7c15ULL) ^ (uint64_t(y) << 32);
    return 2.0 * (double(splitmix64(s) >> 11) * 0x1.0p-53) - 1.0;
}

void add_texture(latent_tensor& img, uint64_t seed, double amplitude) {
    if (amplitude <= 0.0) return;
    rng_stream rng(seed, 0xA11);
    double fx = rng.uniform(0.5, 1.4);
    double fy = rng.uniform(0.5, 1.4);
    double px = rng.uniform(0.0, 6.28);
    double py = rng.uniform(0.0, 6.28);
    const auto& sh = img.shape();
    for (int y = 0; y < sh.height; ++y) {
        for (int x = 0; x < sh.width; ++x) {
            double wave = std::sin(fx * x + px) * std::sin(fy * y + py);
            double grain = hash_noise(seed, x, y);
            img.at(0, y, x) += amplitude * (0.6 * wave + 0.4 * grain);
        }
    }
}

void clamp01(latent_tensor& img) {
    for (double& v : img.values()) v = std::clamp(v, 0.0, 1.0);
}

// Template bank for the oracle: each class rendered clean at several sizes
// into a quadrant-sized patch.
struct template_bank {
    int patch_w = 0;
    int patch_h = 0;
    // [class][size] patches
    std::array<std::vector<std::vector<double>>, n_shape_classes> patches;
};

template_bank build_templates(const dataset_config& cfg) {
    template_bank bank;
    bank.patch_w = cfg.image_shape.width / 2;
    bank.patch_h = cfg.image_shape.height / 2;
    std::vector<double> sizes;
    for (double s = cfg.min_size; s <= cfg.max_size + 1e-9; s += 0.5) sizes.push_back(s);
    double cx = bank.patch_w / 2.0;
    double cy = bank.patch_h / 2.0;
    for (int c = 0; c < n_shape_classes; ++c) {
        for (double s : sizes) {
            std::vector<double> patch(size_t(bank.patch_w) * bank.patch_h, 0.0);
            for (int y = 0; y < bank.patch_h; ++y) {
                for (int x = 0; x < bank.patch_w; ++x) {
                    patch[size_t(y) * bank.patch_w + x] =
                        pixel_coverage(shape_class(c), x, y, cx, cy, s);
                }
            }
            bank.patches[c].push_back(std::move(patch));
        }
    }
    return bank;
}

const template_bank& templates_for(const dataset_config& cfg) {
    static const template_bank bank = build_templates(cfg);
    // Single shipped geometry; rebuilding per config would go here if the
    // image shape ever became configurable per run.
    return bank;
}

double normalized_cross_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    size_t n = a.size();
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / double(n);
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / double(n);
    double num = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double da = a[i] - ma;
        double db = b[i] - mb;
        num += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va <= 1e-12 || vb <= 1e-12) return 0.0;
    return num / std::sqrt(va * vb);
}

}  // namespace

std::string to_string(shape_class c) {
    switch (c) {
        case shape_class::circle: return "circle";
        case shape_class::square: return "square";
        case shape_class::triangle: return "triangle";
    }
    return "circle";
}

shape_class shape_class_from_string(const std::string& s) {
    if (s == "circle") return shape_class::circle;
    if (s == "square") return shape_class::square;
    if (s == "triangle") return shape_class::triangle;
    throw_config("unknown shape class '" + s + "'");
}

condition condition::from_id(int id) {
    COOPDIFF_CHECK(id >= 0 && id < n_conditions, error_kind::config,
                   "condition id " + std::to_string(id) + " out of range");
    condition c;
    c.cls = shape_class(id / n_quadrants);
    c.quadrant = id % n_quadrants;
    return c;
}

condition condition::parse(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos) {
        // Bare integer id.
        try {
            return from_id(std::stoi(s));
        } catch (const std::invalid_argument&) {
            throw_config("cannot parse condition '" + s + "'");
        }
    }
    condition c;
    c.cls = shape_class_from_string(s.substr(0, colon));
    int q = std::stoi(s.substr(colon + 1));
    COOPDIFF_CHECK(q >= 0 && q < n_quadrants, error_kind::config,
                   "condition quadrant out of range in '" + s + "'");
    c.quadrant = q;
    return c;
}

std::string dataset_fingerprint(const dataset_config& cfg) {
    // FNV-1a over the generator version and the value-space description.
    std::string desc = "coopdiff-shapes-v1|" + cfg.image_shape.str() + "|range=0..1";
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : desc) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
    return std::string("dsv1-") + buf;
}

latent_tensor render_sample(const condition& c, double size, double brightness,
                            uint64_t texture_seed, const dataset_config& cfg) {
    latent_tensor img(cfg.image_shape, 0.0);
    auto g = quadrant_region(c.quadrant, cfg.image_shape);
    draw_shape(img, c.cls, g.cx, g.cy, size, brightness);
    add_texture(img, texture_seed, cfg.texture_amplitude);
    clamp01(img);
    return img;
}

std::vector<labelled_image> gen_dataset(int n, uint64_t seed, bool stratified,
                                        const dataset_config& cfg) {
    COOPDIFF_CHECK(n >= 1, error_kind::config, "gen_dataset: n must be >= 1");
    COOPDIFF_CHECK(cfg.texture_amplitude <= max_texture_amplitude, error_kind::config,
                   "gen_dataset: texture amplitude above ceiling");
    rng_stream rng(seed, rng_purpose::dataset);

    std::vector<int> cond_ids(n);
    if (stratified) {
        for (int i = 0; i < n; ++i) cond_ids[i] = i % n_conditions;
    } else {
        // Balanced deck then shuffle: per-condition counts differ by <= 1.
        for (int i = 0; i < n; ++i) cond_ids[i] = i % n_conditions;
        for (int i = n - 1; i > 0; --i) {
            int j = int(rng.uniform_u64(uint64_t(i) + 1));
            std::swap(cond_ids[i], cond_ids[j]);
        }
    }

    std::vector<labelled_image> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        condition c = condition::from_id(cond_ids[i]);
        double size = rng.uniform(cfg.min_size, cfg.max_size);
        double brightness = rng.uniform(cfg.min_brightness, cfg.max_brightness);
        uint64_t tex_seed = rng.next_u64();
        out.push_back({render_sample(c, size, brightness, tex_seed, cfg), c});
    }
    return out;
}

semantic_label semantic_oracle(const latent_tensor& image, const dataset_config& cfg) {
    COOPDIFF_CHECK(image.shape() == cfg.image_shape, error_kind::config,
                   "semantic_oracle: unexpected image shape " + image.shape().str());
    semantic_label label;

    // Quadrant from thresholded mass.
    double best_mass = -1.0;
    double total_mass = 0.0;
    int best_q = 0;
    for (int q = 0; q < n_quadrants; ++q) {
        auto g = quadrant_region(q, cfg.image_shape);
        double mass = 0.0;
        for (int y = g.y0; y < g.y0 + g.h; ++y)
            for (int x = g.x0; x < g.x0 + g.w; ++x)
                mass += std::max(0.0, image.at(0, y, x) - background_threshold);
        total_mass += mass;
        if (mass > best_mass) {
            best_mass = mass;
            best_q = q;
        }
    }
    if (total_mass < min_total_mass) {
        return label;  // blank: undefined, confidence 0
    }

    // Class from normalized cross-correlation against clean templates at the
    // detected quadrant, maximized over the generator's size range.
    const auto& bank = templates_for(cfg);
    auto g = quadrant_region(best_q, cfg.image_shape);
    std::vector<double> patch(size_t(g.w) * g.h);
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x)
            patch[size_t(y) * g.w + x] = image.at(0, g.y0 + y, g.x0 + x);

    std::array<double, n_shape_classes> score{};
    for (int c = 0; c < n_shape_classes; ++c) {
        double best = -1.0;
        for (const auto& tmpl : bank.patches[c]) {
            best = std::max(best, normalized_cross_correlation(patch, tmpl));
        }
        score[c] = best;
    }
    int best_c = 0;
    for (int c = 1; c < n_shape_classes; ++c)
        if (score[c] > score[best_c]) best_c = c;
    double second = -1.0;
    for (int c = 0; c < n_shape_classes; ++c)
        if (c != best_c) second = std::max(second, score[c]);

    label.defined = true;
    label.cls = shape_class(best_c);
    label.quadrant = best_q;
    label.confidence = std::clamp((score[best_c] - second) / full_confidence_margin, 0.0, 1.0);
    return label;
}

}  // namespace coopdiff
