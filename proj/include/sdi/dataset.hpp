#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "sdi/image.hpp"
#include "sdi/tensor.hpp"

namespace sdi::data {

// class 0 is the defect-free class; 1..6 are the defect types
enum class Defect : int {
    good = 0,
    broken_gate,
    paste_spot,
    dirty_cell,
    thick_line,
    scratch,
    color_difference,
};
constexpr int kNumClasses = 7;

const std::vector<std::string>& class_names();
Defect class_from_name(const std::string& name);

struct Provenance {
    std::string source;
    std::size_t row = 0, col = 0;
};

struct LabeledPatch {
    RgbImage image;
    Defect label = Defect::good;
    Provenance provenance;
};

/// Window positions along one axis: 0, stride, 2*stride, ...; a window that
/// would overrun the edge is clamped so it ends at the edge (deduplicated).
std::vector<std::size_t> slide_positions(std::size_t extent, std::size_t window,
                                         std::size_t stride);

struct PatchOffset {
    RgbImage patch;
    std::size_t row = 0, col = 0;
};

std::vector<PatchOffset> slide_split(const RgbImage& img, std::size_t window = 469,
                                     std::size_t stride = 235);

/// Bilinear resize, scaled to [0,1] reals, H x W x 3.
TensorF resize(const RgbImage& img, std::size_t side = 256);

std::array<TensorF, 3> split_channels(const TensorF& t);
TensorF stack_channels(const std::array<TensorF, 3>& planes);

// ---------------------------------------------------------------------------
// Manifest: CSV with header path,label,source,row,col
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string path;
    Defect label = Defect::good;
    Provenance provenance;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::map<std::string, std::size_t> class_counts() const;
};

void save_manifest(const DatasetManifest& m, const std::string& path,
                   const std::string& config_comment = "");
DatasetManifest load_manifest(const std::string& path);

/// <root>/<class>/<image files> ingestion.
DatasetManifest ingest_directory(const std::string& root);

// ---------------------------------------------------------------------------
// Stratified K-fold
// ---------------------------------------------------------------------------

struct FoldPlan {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> test_indices;  // per fold

    std::vector<std::size_t> train_indices(std::size_t fold, std::size_t total) const;
};

/// Per-class shuffled round-robin assignment; per-class fold sizes differ by
/// at most one; deterministic under seed. Every class needs >= k members.
FoldPlan stratified_kfold(const std::vector<int>& labels, std::size_t k,
                          std::uint64_t seed);

}  // namespace sdi::data
