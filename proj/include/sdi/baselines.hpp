#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdi/image.hpp"
#include "sdi/tensor.hpp"

namespace sdi::baseline {

// ---------------------------------------------------------------------------
// LBP: radius-1, 8 neighbors, nearest pixel (borders clamp to the edge).
// bit = 1 where neighbor >= center; 12x12 region grid of normalized
// 256-bin histograms, concatenated (length 36,864).
// ---------------------------------------------------------------------------

std::uint8_t lbp_code(const TensorD& gray, std::size_t y, std::size_t x);
std::vector<double> lbp_features(const TensorD& gray, std::size_t regions = 12);

// ---------------------------------------------------------------------------
// HOG: centered differences, 9 unsigned bins over 0..180 deg with linear
// interpolation, 8x8 cells, 2x2-cell blocks sliding by 1 cell, per-block
// L2 normalization. 256x256 input -> 31*31*4*9 = 34,596 values.
// ---------------------------------------------------------------------------

std::vector<double> hog_features(const TensorD& gray);

// ---------------------------------------------------------------------------
// Gabor bank: 40 even-symmetric 31x31 kernels (5 scales x 8 orientations at
// k*pi/8), DC-subtracted.
// ---------------------------------------------------------------------------

struct GaborBank {
    std::vector<TensorD> kernels;  // 40 of 31 x 31
    std::size_t scales = 5, orientations = 8;

    const TensorD& kernel(std::size_t scale, std::size_t orientation) const {
        return kernels[scale * orientations + orientation];
    }
};

GaborBank build_gabor_bank();

/// SAME-padded 2-D correlation of a single-channel map with one kernel.
TensorD filter2d_same(const TensorD& img, const TensorD& kernel);

/// Grayscale (unweighted channel mean) of an RGB image, [0,1] values.
TensorD to_gray(const data::RgbImage& img);

/// Downsample to 10x10, filter with all 40 kernels, response magnitudes
/// (4,000 raw values per image).
std::vector<double> gabor_raw_features(const TensorD& gray, const GaborBank& bank,
                                       std::size_t down_side = 10);
std::vector<double> gabor_raw_features(const data::RgbImage& img, const GaborBank& bank,
                                       std::size_t down_side = 10);

// ---------------------------------------------------------------------------
// PCA feature reducer ("energy preserving ratio" = retained variance share)
// ---------------------------------------------------------------------------

struct PcaReducer {
    std::vector<double> mean;
    std::vector<std::vector<double>> basis;  // principal axes, rows
    double retained_fraction = 0.0;

    bool fitted() const { return !basis.empty(); }
    std::vector<double> project(const std::vector<double>& x) const;
};

/// Fits on training rows, keeping the smallest component count whose
/// eigenvalue sum reaches energy_ratio of the total.
PcaReducer fit_pca(const std::vector<std::vector<double>>& rows, double energy_ratio);

// ---------------------------------------------------------------------------
// Linear SVM (hinge + L2, projected-subgradient Pegasos schedule)
// ---------------------------------------------------------------------------

struct SvmHyper {
    double lambda = 1e-4;
    std::size_t iterations = 20000;
    std::uint64_t seed = 1;
};

struct SvmModel {
    std::vector<double> w;
    double b = 0.0;
    SvmHyper hyper;
    PcaReducer reducer;  // optional; empty when unused
};

/// labels are +/-1; deterministic under seed. Throws on single-class input.
SvmModel svm_train(const std::vector<std::vector<double>>& features,
                   const std::vector<int>& labels, const SvmHyper& hyper = {});

struct SvmPrediction {
    int label;      // +/-1
    double margin;  // w.x + b, the ROC score
};

SvmPrediction svm_predict(const SvmModel& m, const std::vector<double>& f);

double hinge_objective(const SvmModel& m, const std::vector<std::vector<double>>& xs,
                       const std::vector<int>& ys);

}  // namespace sdi::baseline
