#include "sdi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sdi::eval {

long long ConfusionMatrix::total() const {
    long long t = 0;
    for (auto c : counts) t += c;
    return t;
}

long long ConfusionMatrix::row_sum(std::size_t truth) const {
    long long t = 0;
    for (std::size_t p = 0; p < k; ++p) t += at(truth, p);
    return t;
}

void ConfusionMatrix::add(const ConfusionMatrix& other) {
    if (other.k != k) throw std::invalid_argument("confusion: size mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truth,
                          std::size_t k) {
    if (preds.size() != truth.size())
        throw std::invalid_argument("confusion: length mismatch");
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || truth[i] < 0 || preds[i] >= static_cast<int>(k) ||
            truth[i] >= static_cast<int>(k))
            throw std::invalid_argument("confusion: label out of range");
        ++cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(preds[i]));
    }
    return cm;
}

PrfScores prf_from_counts(long long tp, long long fp, long long fn, long long tn) {
    PrfScores s;
    s.tp = tp;
    s.fp = fp;
    s.fn = fn;
    s.tn = tn;
    if (tp + fp > 0)
        s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    else
        s.degenerate_precision = true;
    if (tp + fn > 0)
        s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    else
        s.degenerate_recall = true;
    if (s.precision + s.recall > 0)
        s.f_measure = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

PrfScores prf(const ConfusionMatrix& cm, std::size_t positive) {
    if (cm.k != 2) throw std::invalid_argument("prf: expected a binary matrix");
    const std::size_t neg = 1 - positive;
    return prf_from_counts(cm.at(positive, positive), cm.at(neg, positive),
                           cm.at(positive, neg), cm.at(neg, neg));
}

RocCurve roc_points(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.size() != truth.size())
        throw std::invalid_argument("roc: length mismatch");
    long long npos = 0, nneg = 0;
    for (int t : truth) (t > 0 ? npos : nneg)++;
    if (npos == 0 || nneg == 0)
        throw std::invalid_argument("roc: need both positive and negative samples");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    long long tp = 0, fp = 0;
    std::size_t i = 0;
    double auc = 0, prev_fpr = 0, prev_tpr = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (truth[order[i]] > 0 ? tp : fp)++;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(nneg);
        const double tpr = static_cast<double>(tp) / static_cast<double>(npos);
        curve.points.push_back({s, fpr, tpr});
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    curve.auc = auc;
    return curve;
}

}  // namespace sdi::eval
