#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdi/baselines.hpp"
#include "sdi/dataset.hpp"
#include "sdi/metrics.hpp"
#include "sdi/network.hpp"
#include "sdi/trainer.hpp"

namespace sdi::eval {

/// In-memory evaluation sample: resized image tensor + 7-way class index.
struct Sample {
    TensorF image;
    int cls = 0;  // 0 = good, 1..6 defects (data::Defect values)
};

struct FoldDefectResult {
    std::size_t fold = 0;
    std::string defect;  // class name, or "all" for the pooled binary result
    PrfScores scores;
};

struct EvalReport {
    std::string experiment_id;
    std::vector<FoldDefectResult> per_fold;
    std::map<std::string, PrfScores> averages;       // mean over folds per defect
    std::map<std::string, double> average_accuracy;  // same keying
    ConfusionMatrix pooled_confusion{2};             // binary, summed over folds
    std::optional<RocCurve> roc;                     // pooled defect-vs-good scores
    double train_seconds = 0;
    double detect_seconds_per_100 = 0;
    std::string config;  // key=value lines embedded in every output file
};

struct EvalOptions {
    std::size_t k = 5;
    std::uint64_t seed = 1;
    std::size_t input_side = 256;
    nn::Hyper hyper;
    baseline::SvmHyper svm_hyper;
    double energy_ratio = 0.9;
    bool with_roc = true;
    std::string config;
};

bool is_svm_method(const std::string& method);

/// K-fold study for one method id (s1/s2/s3/ms/svm-lbphog/svm-gabor):
/// per fold, trains defect-vs-good on the K-1 training folds, then tests each
/// defect class separately against the good test samples (plus a pooled
/// "all" row per fold).
EvalReport crossval(const std::string& method, const std::vector<Sample>& data,
                    const EvalOptions& opts);

/// Evaluates one trained binary classifier (score = defect-class score) over
/// labeled samples, producing per-defect and pooled rows for a single fold id.
void evaluate_split(const std::function<double(const Sample&)>& defect_score,
                    const std::vector<Sample>& test, std::size_t fold_id,
                    EvalReport& report, std::vector<double>* roc_scores,
                    std::vector<int>* roc_truth);

/// Fills averages from the per_fold rows.
void finalize_report(EvalReport& report);

void write_summary_csv(const EvalReport& report, const std::string& path);
void write_confusion_csv(const ConfusionMatrix& cm, const std::string& path,
                         const std::string& config = "");
void write_roc_csv(const RocCurve& curve, const std::string& path,
                   const std::string& config = "");

/// One 8-bit PGM per channel, min-max normalized; layer is "L1" (first
/// activation) or "L3" (last conv activation). MS branches are tagged r/g/b.
std::vector<std::string> activation_dump(nn::Network<float>& net, const TensorF& image,
                                         const std::string& layer,
                                         const std::string& outdir);

/// Wall clock for `run` over the batch; min of `runs` repetitions, seconds.
double timing_bench(const std::function<void()>& run, int runs = 3);

/// Feature extraction used by the SVM baselines.
std::vector<double> lbphog_vector(const TensorF& image);
std::vector<double> gabor_vector(const TensorF& image, const baseline::GaborBank& bank);

}  // namespace sdi::eval
