#pragma once

#include <string>
#include <vector>

namespace sdi::eval {

/// K x K counts, row = true class, column = predicted class.
struct ConfusionMatrix {
    std::size_t k = 2;
    std::vector<long long> counts;  // row-major
    std::vector<std::string> names;

    explicit ConfusionMatrix(std::size_t classes = 2)
        : k(classes), counts(classes * classes, 0) {}

    long long& at(std::size_t truth, std::size_t pred) { return counts[truth * k + pred]; }
    long long at(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }
    long long total() const;
    long long row_sum(std::size_t truth) const;
    void add(const ConfusionMatrix& other);
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truth,
                          std::size_t k);

/// Precision/recall/F for a binary matrix (class 1 = positive/defect by
/// default). Degenerate denominators produce 0 with the corresponding flag.
struct PrfScores {
    double precision = 0, recall = 0, f_measure = 0;
    long long tp = 0, fp = 0, fn = 0, tn = 0;
    bool degenerate_precision = false, degenerate_recall = false;

    double accuracy() const {
        const long long t = tp + fp + fn + tn;
        return t ? static_cast<double>(tp + tn) / static_cast<double>(t) : 0.0;
    }
};

PrfScores prf(const ConfusionMatrix& cm, std::size_t positive = 1);
PrfScores prf_from_counts(long long tp, long long fp, long long fn, long long tn);

struct RocPoint {
    double threshold = 0, fpr = 0, tpr = 0;
};

/// Step curve from descending score thresholds; tied scores form one step.
/// AUC by the trapezoid rule (equals the pairwise win rate with ties at 1/2).
struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0;
};

RocCurve roc_points(const std::vector<double>& scores, const std::vector<int>& truth);

}  // namespace sdi::eval
