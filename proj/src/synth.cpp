#include "sdi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "sdi/rng.hpp"

namespace fs = std::filesystem;

namespace sdi::data {

void SynthSpec::validate() const {
    std::size_t total = 0;
    for (const auto& [cls, n] : counts) total += n;
    if (total == 0) throw std::invalid_argument("synth: zero total count");
    for (const auto& [cls, p] : profiles)
        if (p.r < 0 || p.r > 1 || p.g < 0 || p.g > 1 || p.b < 0 || p.b > 1)
            throw std::invalid_argument("synth: contrast profile outside [0,1]");
    if (side < 16) throw std::invalid_argument("synth: side too small");
}

namespace {

inline std::uint8_t clamp8(double v) {
    return static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v + 0.5));
}

/// Per-channel delta field applied on top of the clean image.
struct Delta {
    std::size_t side;
    std::vector<double> r, g, b;
    explicit Delta(std::size_t s) : side(s), r(s * s, 0), g(s * s, 0), b(s * s, 0) {}
    void add(std::size_t y, std::size_t x, double dr, double dg, double db) {
        const std::size_t i = y * side + x;
        r[i] += dr;
        g[i] += dg;
        b[i] += db;
    }
};

/// Lattice-textured bluish background with bright vertical grid lines.
RgbImage make_base(const SynthSpec& spec, Rng& rng, std::vector<std::size_t>& lines) {
    const std::size_t s = spec.side;
    RgbImage img(s, s);

    // coarse random lattice, bilinearly interpolated
    const std::size_t cells = std::max<std::size_t>(2, spec.lattice_cells);
    std::vector<double> grid((cells + 1) * (cells + 1));
    for (auto& v : grid) v = (rng.uniform() - 0.5) * 50.0;
    auto lattice = [&](std::size_t y, std::size_t x) {
        const double fy = static_cast<double>(y) / s * cells;
        const double fx = static_cast<double>(x) / s * cells;
        const std::size_t y0 = std::min<std::size_t>(static_cast<std::size_t>(fy), cells - 1);
        const std::size_t x0 = std::min<std::size_t>(static_cast<std::size_t>(fx), cells - 1);
        const double ay = fy - y0, ax = fx - x0;
        const double v00 = grid[y0 * (cells + 1) + x0], v01 = grid[y0 * (cells + 1) + x0 + 1];
        const double v10 = grid[(y0 + 1) * (cells + 1) + x0],
                     v11 = grid[(y0 + 1) * (cells + 1) + x0 + 1];
        return v00 * (1 - ay) * (1 - ax) + v01 * (1 - ay) * ax + v10 * ay * (1 - ax) +
               v11 * ay * ax;
    };

    const double base_r = 70 + (rng.uniform() - 0.5) * 10;
    const double base_g = 85 + (rng.uniform() - 0.5) * 10;
    const double base_b = 150 + (rng.uniform() - 0.5) * 10;
    for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
            const double lat = lattice(y, x);
            const double noise = (rng.uniform() - 0.5) * 12.0;
            const std::size_t i = img.idx(y, x);
            img.r[i] = clamp8(base_r + 0.9 * lat + noise);
            img.g[i] = clamp8(base_g + 1.0 * lat + noise);
            img.b[i] = clamp8(base_b + 1.1 * lat + noise);
        }

    // silver grid lines
    lines.clear();
    const std::size_t pitch = std::max<std::size_t>(8, spec.line_pitch);
    for (std::size_t x = pitch / 2; x + 1 < s; x += pitch) {
        lines.push_back(x);
        for (std::size_t y = 0; y < s; ++y)
            for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t i = img.idx(y, x + dx);
                img.r[i] = clamp8(0.2 * img.r[i] + 0.8 * 205);
                img.g[i] = clamp8(0.2 * img.g[i] + 0.8 * 205);
                img.b[i] = clamp8(0.2 * img.b[i] + 0.8 * 205);
            }
    }
    return img;
}

void draw_broken_gate(Delta& d, const RgbImage& base,
                      const std::vector<std::size_t>& lines, Rng& rng) {
    // gap in one grid line: pull the line back toward the local background
    const std::size_t s = d.side;
    const std::size_t line = lines[rng.uniform_int(lines.size())];
    const std::size_t len = s / 5 + rng.uniform_int(s / 5);
    const std::size_t y0 = rng.uniform_int(s - len);
    for (std::size_t y = y0; y < y0 + len; ++y)
        for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t i = base.idx(y, line + dx);
            d.add(y, line + dx, 70.0 - base.r[i], 85.0 - base.g[i], 150.0 - base.b[i]);
        }
}

void draw_paste_spot(Delta& d, Rng& rng) {
    const std::size_t s = d.side;
    const double rad = s / 14.0 + rng.uniform() * s / 14.0;
    const double cy = rad + rng.uniform() * (s - 2 * rad);
    const double cx = rad + rng.uniform() * (s - 2 * rad);
    for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
            const double dist = std::hypot(y - cy, x - cx);
            if (dist < rad) {
                const double w = 1.0 - dist / rad;
                d.add(y, x, -95 * w, -95 * w, -90 * w);
            }
        }
}

void draw_dirty_cell(Delta& d, Rng& rng) {
    // large low-contrast elliptic region
    const std::size_t s = d.side;
    const double ry = s / 5.0 + rng.uniform() * s / 6.0;
    const double rx = s / 5.0 + rng.uniform() * s / 6.0;
    const double cy = ry + rng.uniform() * (s - 2 * ry);
    const double cx = rx + rng.uniform() * (s - 2 * rx);
    for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
            const double e = std::pow((y - cy) / ry, 2) + std::pow((x - cx) / rx, 2);
            if (e < 1.0) {
                const double w = 1.0 - e;
                d.add(y, x, -40 * w, -40 * w, -35 * w);
            }
        }
}

void draw_thick_line(Delta& d, const RgbImage& base,
                     const std::vector<std::size_t>& lines, Rng& rng) {
    // widen one grid line by ~3 px on each side
    const std::size_t s = d.side;
    const std::size_t line = lines[rng.uniform_int(lines.size())];
    const std::size_t extra = 2 + rng.uniform_int(3);
    for (std::size_t y = 0; y < s; ++y)
        for (std::size_t off = 1; off <= extra; ++off) {
            for (int sign : {-1, 1}) {
                const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(line) +
                                         (sign < 0 ? -static_cast<std::ptrdiff_t>(off)
                                                   : static_cast<std::ptrdiff_t>(off + 1));
                if (x < 0 || x >= static_cast<std::ptrdiff_t>(s)) continue;
                const std::size_t i = base.idx(y, static_cast<std::size_t>(x));
                d.add(y, static_cast<std::size_t>(x), 205.0 - base.r[i],
                      205.0 - base.g[i], 205.0 - base.b[i]);
            }
        }
}

void draw_scratch(Delta& d, Rng& rng) {
    // thin bright random polyline
    const std::size_t s = d.side;
    double y = rng.uniform() * s, x = rng.uniform() * s;
    double angle = rng.uniform() * 6.2831853;
    const std::size_t steps = s + s / 2;
    for (std::size_t i = 0; i < steps; ++i) {
        angle += (rng.uniform() - 0.5) * 0.35;
        y += std::sin(angle);
        x += std::cos(angle);
        if (y < 1 || y >= s - 1 || x < 1 || x >= s - 1) {
            angle += 3.14159265;
            y = std::clamp(y, 1.0, static_cast<double>(s - 2));
            x = std::clamp(x, 1.0, static_cast<double>(s - 2));
        }
        const std::size_t yi = static_cast<std::size_t>(y);
        const std::size_t xi = static_cast<std::size_t>(x);
        for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx)
                d.add(yi + dy, xi + dx, 90, 90, 90);
    }
}

void draw_color_difference(Delta& d, Rng& rng) {
    // firing-induced global hue shift
    const double dr = 30 + rng.uniform() * 15;
    const double dg = -20 - rng.uniform() * 10;
    const double db = 25 + rng.uniform() * 10;
    for (std::size_t y = 0; y < d.side; ++y)
        for (std::size_t x = 0; x < d.side; ++x) d.add(y, x, dr, dg, db);
}

}  // namespace

SynthImage synth_image(Defect cls, const SynthSpec& spec, std::size_t index) {
    Rng rng = Rng::derive(spec.seed, static_cast<std::uint64_t>(cls) + 1, index + 1);
    SynthImage out;
    out.label = cls;
    std::vector<std::size_t> lines;
    out.clean = make_base(spec, rng, lines);

    Delta delta(spec.side);
    switch (cls) {
        case Defect::good:
            break;
        case Defect::broken_gate:
            draw_broken_gate(delta, out.clean, lines, rng);
            break;
        case Defect::paste_spot:
            draw_paste_spot(delta, rng);
            break;
        case Defect::dirty_cell:
            draw_dirty_cell(delta, rng);
            break;
        case Defect::thick_line:
            draw_thick_line(delta, out.clean, lines, rng);
            break;
        case Defect::scratch:
            draw_scratch(delta, rng);
            break;
        case Defect::color_difference:
            draw_color_difference(delta, rng);
            break;
    }

    ChannelProfile prof;
    if (auto it = spec.profiles.find(cls); it != spec.profiles.end()) prof = it->second;
    out.defective = out.clean;
    for (std::size_t i = 0; i < spec.side * spec.side; ++i) {
        out.defective.r[i] = clamp8(out.clean.r[i] + prof.r * delta.r[i]);
        out.defective.g[i] = clamp8(out.clean.g[i] + prof.g * delta.g[i]);
        out.defective.b[i] = clamp8(out.clean.b[i] + prof.b * delta.b[i]);
    }
    return out;
}

std::vector<SynthImage> synth_dataset(const SynthSpec& spec) {
    spec.validate();
    std::vector<SynthImage> out;
    for (const auto& [cls, n] : spec.counts)
        for (std::size_t i = 0; i < n; ++i) out.push_back(synth_image(cls, spec, i));
    return out;
}

DatasetManifest synth_generate(const SynthSpec& spec, const std::string& out_dir,
                               const std::string& config_comment) {
    spec.validate();
    fs::create_directories(out_dir);
    DatasetManifest m;
    for (const auto& [cls, n] : spec.counts) {
        const std::string& name = class_names()[static_cast<int>(cls)];
        fs::create_directories(fs::path(out_dir) / name);
        for (std::size_t i = 0; i < n; ++i) {
            SynthImage img = synth_image(cls, spec, i);
            const std::string rel = name + "/" + name + "_" + std::to_string(i) + ".ppm";
            save_ppm(img.defective, (fs::path(out_dir) / rel).string());
            ManifestEntry e;
            e.path = rel;
            e.label = cls;
            e.provenance = {"synth_seed" + std::to_string(spec.seed), 0, i};
            m.entries.push_back(std::move(e));
        }
    }
    save_manifest(m, (fs::path(out_dir) / "manifest.csv").string(), config_comment);
    return m;
}

}  // namespace sdi::data
