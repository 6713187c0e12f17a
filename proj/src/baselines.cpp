#include "sdi/baselines.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sdi/rng.hpp"

namespace sdi::baseline {

namespace {

constexpr double kPi = 3.14159265358979323846;

inline double at_clamped(const TensorD& gray, std::ptrdiff_t y, std::ptrdiff_t x) {
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(gray.dims[0]);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(gray.dims[1]);
    y = std::clamp<std::ptrdiff_t>(y, 0, H - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, W - 1);
    return gray.data[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)];
}

}  // namespace

std::uint8_t lbp_code(const TensorD& gray, std::size_t y, std::size_t x) {
    // neighbor order: E, NE, N, NW, W, SW, S, SE (circular, radius 1)
    static const int dy[8] = {0, -1, -1, -1, 0, 1, 1, 1};
    static const int dx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
    const double center = gray.data[y * gray.dims[1] + x];
    std::uint8_t code = 0;
    for (int i = 0; i < 8; ++i) {
        const double n = at_clamped(gray, static_cast<std::ptrdiff_t>(y) + dy[i],
                                    static_cast<std::ptrdiff_t>(x) + dx[i]);
        if (n >= center) code |= static_cast<std::uint8_t>(1u << i);
    }
    return code;
}

std::vector<double> lbp_features(const TensorD& gray, std::size_t regions) {
    const std::size_t H = gray.dims[0], W = gray.dims[1];
    if (H < 3 || W < 3) throw std::invalid_argument("lbp: image too small");
    std::vector<double> out(regions * regions * 256, 0.0);
    for (std::size_t ry = 0; ry < regions; ++ry) {
        const std::size_t y0 = H * ry / regions, y1 = H * (ry + 1) / regions;
        for (std::size_t rx = 0; rx < regions; ++rx) {
            const std::size_t x0 = W * rx / regions, x1 = W * (rx + 1) / regions;
            double* hist = &out[(ry * regions + rx) * 256];
            std::size_t n = 0;
            for (std::size_t y = y0; y < y1; ++y)
                for (std::size_t x = x0; x < x1; ++x) {
                    hist[lbp_code(gray, y, x)] += 1.0;
                    ++n;
                }
            if (n > 0)
                for (int i = 0; i < 256; ++i) hist[i] /= static_cast<double>(n);
        }
    }
    return out;
}

std::vector<double> hog_features(const TensorD& gray) {
    const std::size_t H = gray.dims[0], W = gray.dims[1];
    if (H % 8 != 0 || W % 8 != 0)
        throw std::invalid_argument("hog: dims must be multiples of 8");
    constexpr std::size_t kCell = 8;
    constexpr std::size_t kBins = 9;
    const std::size_t cells_y = H / kCell, cells_x = W / kCell;

    // cell histograms with linear orientation interpolation (unsigned, 0..180)
    std::vector<double> cells(cells_y * cells_x * kBins, 0.0);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const double gx = at_clamped(gray, y, static_cast<std::ptrdiff_t>(x) + 1) -
                              at_clamped(gray, y, static_cast<std::ptrdiff_t>(x) - 1);
            const double gy = at_clamped(gray, static_cast<std::ptrdiff_t>(y) + 1, x) -
                              at_clamped(gray, static_cast<std::ptrdiff_t>(y) - 1, x);
            const double mag = std::hypot(gx, gy);
            if (mag == 0) continue;
            double ang = std::atan2(gy, gx);  // (-pi, pi]
            if (ang < 0) ang += kPi;          // unsigned
            const double pos = ang / kPi * kBins - 0.5;  // bin centers at (i+0.5)/9*pi
            double lo = std::floor(pos);
            const double frac = pos - lo;
            const std::size_t b0 = (static_cast<std::ptrdiff_t>(lo) < 0)
                                       ? kBins - 1
                                       : static_cast<std::size_t>(lo) % kBins;
            const std::size_t b1 = (b0 + 1) % kBins;
            double* hist = &cells[((y / kCell) * cells_x + x / kCell) * kBins];
            hist[b0] += mag * (1.0 - frac);
            hist[b1] += mag * frac;
        }

    // 2x2-cell blocks, 1-cell overlap, per-block L2 normalization
    const std::size_t blocks_y = cells_y - 1, blocks_x = cells_x - 1;
    std::vector<double> out;
    out.reserve(blocks_y * blocks_x * 4 * kBins);
    for (std::size_t by = 0; by < blocks_y; ++by)
        for (std::size_t bx = 0; bx < blocks_x; ++bx) {
            double block[4 * kBins];
            std::size_t p = 0;
            for (std::size_t cy = by; cy < by + 2; ++cy)
                for (std::size_t cx = bx; cx < bx + 2; ++cx)
                    for (std::size_t bin = 0; bin < kBins; ++bin)
                        block[p++] = cells[(cy * cells_x + cx) * kBins + bin];
            double norm = 0;
            for (double v : block) norm += v * v;
            norm = std::sqrt(norm + 1e-6 * 1e-6);
            for (double v : block) out.push_back(norm > 1e-12 ? v / norm : 0.0);
        }
    return out;
}

GaborBank build_gabor_bank() {
    constexpr std::size_t kSize = 31;
    GaborBank bank;
    for (std::size_t s = 0; s < bank.scales; ++s) {
        const double wavelength = 4.0 * std::pow(std::sqrt(2.0), static_cast<double>(s));
        const double sigma = 0.56 * wavelength;
        const double gamma = 0.5;
        for (std::size_t o = 0; o < bank.orientations; ++o) {
            const double theta = static_cast<double>(o) * kPi / 8.0;
            TensorD k({kSize, kSize});
            double sum = 0;
            for (std::size_t y = 0; y < kSize; ++y)
                for (std::size_t x = 0; x < kSize; ++x) {
                    const double yy = static_cast<double>(y) - (kSize - 1) / 2.0;
                    const double xx = static_cast<double>(x) - (kSize - 1) / 2.0;
                    const double xr = xx * std::cos(theta) + yy * std::sin(theta);
                    const double yr = -xx * std::sin(theta) + yy * std::cos(theta);
                    const double v =
                        std::exp(-(xr * xr + gamma * gamma * yr * yr) / (2 * sigma * sigma)) *
                        std::cos(2 * kPi * xr / wavelength);
                    k.data[y * kSize + x] = v;
                    sum += v;
                }
            const double mean = sum / (kSize * kSize);
            for (auto& v : k.data) v -= mean;  // kill the DC response
            bank.kernels.push_back(std::move(k));
        }
    }
    return bank;
}

TensorD filter2d_same(const TensorD& img, const TensorD& kernel) {
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(img.dims[0]);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(img.dims[1]);
    const std::ptrdiff_t K = static_cast<std::ptrdiff_t>(kernel.dims[0]);
    const std::ptrdiff_t pad = (K - 1) / 2;
    TensorD out({img.dims[0], img.dims[1]});
    for (std::ptrdiff_t y = 0; y < H; ++y)
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            double acc = 0;
            for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
                const std::ptrdiff_t iy = y + ky - pad;
                if (iy < 0 || iy >= H) continue;
                for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
                    const std::ptrdiff_t ix = x + kx - pad;
                    if (ix < 0 || ix >= W) continue;
                    acc += img.data[iy * W + ix] * kernel.data[ky * K + kx];
                }
            }
            out.data[y * W + x] = acc;
        }
    return out;
}

TensorD to_gray(const data::RgbImage& img) {
    TensorD out({img.height, img.width});
    for (std::size_t i = 0; i < img.r.size(); ++i)
        out.data[i] = (img.r[i] + img.g[i] + img.b[i]) / (3.0 * 255.0);
    return out;
}

namespace {

TensorD downsample(const TensorD& gray, std::size_t side) {
    TensorD out({side, side});
    const double sy = static_cast<double>(gray.dims[0]) / side;
    const double sx = static_cast<double>(gray.dims[1]) / side;
    for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
            const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                                         static_cast<double>(gray.dims[0] - 1));
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                         static_cast<double>(gray.dims[1] - 1));
            const std::size_t y0 = static_cast<std::size_t>(fy);
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t y1 = std::min(y0 + 1, gray.dims[0] - 1);
            const std::size_t x1 = std::min(x0 + 1, gray.dims[1] - 1);
            const double ay = fy - y0, ax = fx - x0;
            out.data[y * side + x] =
                gray.data[y0 * gray.dims[1] + x0] * (1 - ay) * (1 - ax) +
                gray.data[y0 * gray.dims[1] + x1] * (1 - ay) * ax +
                gray.data[y1 * gray.dims[1] + x0] * ay * (1 - ax) +
                gray.data[y1 * gray.dims[1] + x1] * ay * ax;
        }
    return out;
}

}  // namespace

std::vector<double> gabor_raw_features(const data::RgbImage& img, const GaborBank& bank,
                                       std::size_t down_side) {
    return gabor_raw_features(to_gray(img), bank, down_side);
}

std::vector<double> gabor_raw_features(const TensorD& gray, const GaborBank& bank,
                                       std::size_t down_side) {
    TensorD small = downsample(gray, down_side);
    std::vector<double> out;
    out.reserve(bank.kernels.size() * down_side * down_side);
    for (const auto& k : bank.kernels) {
        TensorD resp = filter2d_same(small, k);
        for (double v : resp.data) out.push_back(std::abs(v));
    }
    return out;
}

std::vector<double> PcaReducer::project(const std::vector<double>& x) const {
    if (!fitted()) throw std::logic_error("pca: reducer not fitted");
    if (x.size() != mean.size()) throw std::invalid_argument("pca: dimension mismatch");
    std::vector<double> out(basis.size(), 0.0);
    for (std::size_t i = 0; i < basis.size(); ++i) {
        double acc = 0;
        for (std::size_t j = 0; j < x.size(); ++j) acc += basis[i][j] * (x[j] - mean[j]);
        out[i] = acc;
    }
    return out;
}

PcaReducer fit_pca(const std::vector<std::vector<double>>& rows, double energy_ratio) {
    if (rows.size() < 2) throw std::invalid_argument("pca: need at least 2 rows");
    const std::size_t n = rows.size(), d = rows[0].size();
    PcaReducer red;
    red.mean.assign(d, 0.0);
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j) red.mean[j] += r[j];
    for (auto& m : red.mean) m /= static_cast<double>(n);

    Eigen::MatrixXd X(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) X(i, j) = rows[i][j] - red.mean[j];

    // n << d: singular values of X give the covariance eigenvalues s^2/(n-1)
    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    std::vector<double> eig(sv.size());
    double total = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        eig[i] = sv[i] * sv[i];
        total += eig[i];
    }
    std::size_t keep = 0;
    double acc = 0;
    while (keep < eig.size() && (total <= 0 || acc / total < energy_ratio)) {
        acc += eig[keep];
        ++keep;
    }
    if (keep == 0) keep = 1;
    red.retained_fraction = total > 0 ? acc / total : 1.0;
    for (std::size_t i = 0; i < keep; ++i) {
        std::vector<double> axis(d);
        for (std::size_t j = 0; j < d; ++j) axis[j] = svd.matrixV()(j, i);
        red.basis.push_back(std::move(axis));
    }
    return red;
}

SvmModel svm_train(const std::vector<std::vector<double>>& features,
                   const std::vector<int>& labels, const SvmHyper& hyper) {
    if (features.empty() || features.size() != labels.size())
        throw std::invalid_argument("svm: bad training set");
    bool pos = false, neg = false;
    for (int y : labels) {
        if (y != 1 && y != -1) throw std::invalid_argument("svm: labels must be +/-1");
        (y > 0 ? pos : neg) = true;
    }
    if (!pos || !neg) throw std::invalid_argument("svm: single-class input");

    // the bias rides along as an appended constant feature; a raw
    // unregularized bias update blows up under the huge early 1/(lambda*t)
    // steps and never recovers
    const std::size_t d = features[0].size();
    SvmModel m;
    m.hyper = hyper;
    m.w.assign(d, 0.0);
    m.b = 0.0;
    Rng rng(hyper.seed);
    const double lambda = hyper.lambda;
    for (std::size_t t = 1; t <= hyper.iterations; ++t) {
        const std::size_t i = rng.uniform_int(features.size());
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const auto& x = features[i];
        const double y = labels[i];
        double margin = m.b;
        for (std::size_t j = 0; j < d; ++j) margin += m.w[j] * x[j];
        const double shrink = 1.0 - eta * lambda;
        for (auto& w : m.w) w *= shrink;
        m.b *= shrink;
        if (y * margin < 1.0) {
            for (std::size_t j = 0; j < d; ++j) m.w[j] += eta * y * x[j];
            m.b += eta * y;
        }
        // project onto the 1/sqrt(lambda) ball
        double norm2 = m.b * m.b;
        for (double w : m.w) norm2 += w * w;
        const double bound = 1.0 / std::sqrt(lambda);
        if (norm2 > bound * bound) {
            const double scale = bound / std::sqrt(norm2);
            for (auto& w : m.w) w *= scale;
            m.b *= scale;
        }
    }
    return m;
}

SvmPrediction svm_predict(const SvmModel& m, const std::vector<double>& f) {
    std::vector<double> proj;
    const std::vector<double>* x = &f;
    if (m.reducer.fitted()) {
        proj = m.reducer.project(f);
        x = &proj;
    }
    if (x->size() != m.w.size()) throw std::invalid_argument("svm: dimension mismatch");
    double margin = m.b;
    for (std::size_t j = 0; j < x->size(); ++j) margin += m.w[j] * (*x)[j];
    return {margin >= 0 ? 1 : -1, margin};
}

double hinge_objective(const SvmModel& m, const std::vector<std::vector<double>>& xs,
                       const std::vector<int>& ys) {
    double loss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double margin = svm_predict(m, xs[i]).margin * ys[i];
        loss += std::max(0.0, 1.0 - margin);
    }
    loss /= static_cast<double>(xs.size());
    double norm2 = m.b * m.b;  // the bias is a regularized constant feature
    for (double w : m.w) norm2 += w * w;
    return loss + 0.5 * m.hyper.lambda * norm2;
}

}  // namespace sdi::baseline
