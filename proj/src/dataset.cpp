#include "sdi/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sdi/rng.hpp"

namespace fs = std::filesystem;

namespace sdi::data {

const std::vector<std::string>& class_names() {
    static const std::vector<std::string> names = {
        "good",       "broken_gate", "paste_spot",      "dirty_cell",
        "thick_line", "scratch",     "color_difference"};
    return names;
}

Defect class_from_name(const std::string& name) {
    const auto& names = class_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<Defect>(i);
    throw std::invalid_argument("unknown class name: " + name);
}

std::vector<std::size_t> slide_positions(std::size_t extent, std::size_t window,
                                         std::size_t stride) {
    if (window == 0 || stride == 0)
        throw std::invalid_argument("slide: window and stride must be positive");
    if (window > extent) throw std::invalid_argument("slide: window larger than image");
    std::vector<std::size_t> pos;
    for (std::size_t p = 0;; p += stride) {
        pos.push_back(std::min(p, extent - window));
        if (p + window >= extent) break;
    }
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    return pos;
}

std::vector<PatchOffset> slide_split(const RgbImage& img, std::size_t window,
                                     std::size_t stride) {
    auto rows = slide_positions(img.height, window, stride);
    auto cols = slide_positions(img.width, window, stride);
    std::vector<PatchOffset> out;
    out.reserve(rows.size() * cols.size());
    for (auto ry : rows) {
        for (auto cx : cols) {
            PatchOffset po;
            po.row = ry;
            po.col = cx;
            po.patch = RgbImage(window, window);
            for (std::size_t y = 0; y < window; ++y)
                for (std::size_t x = 0; x < window; ++x) {
                    const std::size_t src = img.idx(ry + y, cx + x);
                    const std::size_t dst = po.patch.idx(y, x);
                    po.patch.r[dst] = img.r[src];
                    po.patch.g[dst] = img.g[src];
                    po.patch.b[dst] = img.b[src];
                }
            out.push_back(std::move(po));
        }
    }
    return out;
}

TensorF resize(const RgbImage& img, std::size_t side) {
    if (img.width < 1 || img.height < 1) throw std::invalid_argument("resize: empty image");
    TensorF out({side, side, 3});
    const double sy = static_cast<double>(img.height) / static_cast<double>(side);
    const double sx = static_cast<double>(img.width) / static_cast<double>(side);
    auto sample = [&](const std::vector<std::uint8_t>& plane, double y, double x) {
        const auto clamp = [](double v, double lo, double hi) {
            return v < lo ? lo : (v > hi ? hi : v);
        };
        y = clamp(y, 0.0, static_cast<double>(img.height - 1));
        x = clamp(x, 0.0, static_cast<double>(img.width - 1));
        const std::size_t y0 = static_cast<std::size_t>(y);
        const std::size_t x0 = static_cast<std::size_t>(x);
        const std::size_t y1 = std::min(y0 + 1, img.height - 1);
        const std::size_t x1 = std::min(x0 + 1, img.width - 1);
        const double fy = y - static_cast<double>(y0);
        const double fx = x - static_cast<double>(x0);
        const double v00 = plane[y0 * img.width + x0], v01 = plane[y0 * img.width + x1];
        const double v10 = plane[y1 * img.width + x0], v11 = plane[y1 * img.width + x1];
        return (v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx + v10 * fy * (1 - fx) +
                v11 * fy * fx) / 255.0;
    };
    for (std::size_t oy = 0; oy < side; ++oy) {
        const double y = (static_cast<double>(oy) + 0.5) * sy - 0.5;
        for (std::size_t ox = 0; ox < side; ++ox) {
            const double x = (static_cast<double>(ox) + 0.5) * sx - 0.5;
            out.at(oy, ox, 0) = static_cast<float>(sample(img.r, y, x));
            out.at(oy, ox, 1) = static_cast<float>(sample(img.g, y, x));
            out.at(oy, ox, 2) = static_cast<float>(sample(img.b, y, x));
        }
    }
    return out;
}

std::array<TensorF, 3> split_channels(const TensorF& t) {
    if (t.rank() != 3 || t.dims[2] != 3)
        throw std::invalid_argument("split_channels: expected H x W x 3");
    std::array<TensorF, 3> planes = {TensorF({t.dims[0], t.dims[1], 1}),
                                     TensorF({t.dims[0], t.dims[1], 1}),
                                     TensorF({t.dims[0], t.dims[1], 1})};
    for (std::size_t pos = 0; pos < t.dims[0] * t.dims[1]; ++pos)
        for (std::size_t c = 0; c < 3; ++c) planes[c].data[pos] = t.data[pos * 3 + c];
    return planes;
}

TensorF stack_channels(const std::array<TensorF, 3>& planes) {
    TensorF out({planes[0].dims[0], planes[0].dims[1], 3});
    for (std::size_t pos = 0; pos < out.dims[0] * out.dims[1]; ++pos)
        for (std::size_t c = 0; c < 3; ++c) out.data[pos * 3 + c] = planes[c].data[pos];
    return out;
}

std::map<std::string, std::size_t> DatasetManifest::class_counts() const {
    std::map<std::string, std::size_t> counts;
    for (const auto& e : entries) counts[class_names()[static_cast<int>(e.label)]]++;
    return counts;
}

void save_manifest(const DatasetManifest& m, const std::string& path,
                   const std::string& config_comment) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    if (!config_comment.empty()) {
        std::istringstream lines(config_comment);
        std::string line;
        while (std::getline(lines, line)) out << "# " << line << "\n";
    }
    out << "path,label,source,row,col\n";
    for (const auto& e : m.entries)
        out << e.path << "," << class_names()[static_cast<int>(e.label)] << ","
            << e.provenance.source << "," << e.provenance.row << "," << e.provenance.col
            << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    DatasetManifest m;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "path,label,source,row,col")
                throw std::runtime_error("bad manifest header: " + line);
            header_seen = true;
            continue;
        }
        std::istringstream ss(line);
        std::string path_f, label_f, source_f, row_f, col_f;
        if (!std::getline(ss, path_f, ',') || !std::getline(ss, label_f, ',') ||
            !std::getline(ss, source_f, ',') || !std::getline(ss, row_f, ',') ||
            !std::getline(ss, col_f))
            throw std::runtime_error("bad manifest row: " + line);
        ManifestEntry e;
        // relative entries are taken relative to the manifest's directory
        const fs::path parent = fs::path(path).parent_path();
        if (!fs::path(path_f).is_absolute() && !parent.empty())
            path_f = (parent / path_f).string();
        e.path = path_f;
        e.label = class_from_name(label_f);
        e.provenance = {source_f, std::stoul(row_f), std::stoul(col_f)};
        m.entries.push_back(std::move(e));
    }
    if (!header_seen) throw std::runtime_error("empty manifest: " + path);
    return m;
}

DatasetManifest ingest_directory(const std::string& root) {
    DatasetManifest m;
    for (const auto& cls : fs::directory_iterator(root)) {
        if (!cls.is_directory()) continue;
        Defect label;
        try {
            label = class_from_name(cls.path().filename().string());
        } catch (const std::invalid_argument&) {
            continue;  // unrelated directory
        }
        std::vector<std::string> files;
        for (const auto& f : fs::directory_iterator(cls.path()))
            if (f.is_regular_file()) files.push_back(f.path().string());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            ManifestEntry e;
            e.path = f;
            e.label = label;
            e.provenance.source = f;
            m.entries.push_back(std::move(e));
        }
    }
    return m;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold,
                                                 std::size_t total) const {
    std::vector<bool> is_test(total, false);
    for (auto i : test_indices.at(fold)) is_test[i] = true;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < total; ++i)
        if (!is_test[i]) out.push_back(i);
    return out;
}

FoldPlan stratified_kfold(const std::vector<int>& labels, std::size_t k,
                          std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
    if (labels.empty()) throw std::invalid_argument("kfold: no samples");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (const auto& [cls, idx] : by_class)
        if (idx.size() < k)
            throw std::invalid_argument("kfold: class " + std::to_string(cls) +
                                        " has fewer members than k");
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.test_indices.assign(k, {});
    Rng rng(seed);
    for (auto& [cls, idx] : by_class) {
        shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < idx.size(); ++i)
            plan.test_indices[i % k].push_back(idx[i]);
    }
    for (auto& fold : plan.test_indices) std::sort(fold.begin(), fold.end());
    return plan;
}

}  // namespace sdi::data
