#include "sdi/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "sdi/architectures.hpp"

namespace fs = std::filesystem;

namespace sdi::eval {

namespace {

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

TensorD gray_of(const TensorF& image) {
    TensorD gray({image.dims[0], image.dims[1]});
    for (std::size_t pos = 0; pos < gray.size(); ++pos)
        gray.data[pos] = (image.data[pos * 3] + image.data[pos * 3 + 1] +
                          image.data[pos * 3 + 2]) / 3.0;
    return gray;
}

void write_config_comment(std::ofstream& out, const std::string& config) {
    std::istringstream lines(config);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << "\n";
}

}  // namespace

bool is_svm_method(const std::string& method) {
    return method == "svm-lbphog" || method == "svm-gabor";
}

std::vector<double> lbphog_vector(const TensorF& image) {
    TensorD gray = gray_of(image);
    std::vector<double> f = baseline::lbp_features(gray);
    std::vector<double> h = baseline::hog_features(gray);
    f.insert(f.end(), h.begin(), h.end());
    return f;
}

std::vector<double> gabor_vector(const TensorF& image, const baseline::GaborBank& bank) {
    return baseline::gabor_raw_features(gray_of(image), bank);
}

void evaluate_split(const std::function<double(const Sample&)>& defect_score,
                    const std::vector<Sample>& test, std::size_t fold_id,
                    EvalReport& report, std::vector<double>* roc_scores,
                    std::vector<int>* roc_truth) {
    std::vector<double> scores(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        scores[i] = defect_score(test[i]);
        if (roc_scores) {
            roc_scores->push_back(scores[i]);
            roc_truth->push_back(test[i].cls > 0 ? 1 : 0);
        }
    }
    auto predicted_defect = [&](std::size_t i) { return scores[i] >= 0.0; };

    // pooled binary result (any defect vs good)
    {
        long long tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            const bool truth = test[i].cls > 0, pred = predicted_defect(i);
            if (truth && pred) ++tp;
            else if (!truth && pred) ++fp;
            else if (truth && !pred) ++fn;
            else ++tn;
            ++report.pooled_confusion.at(truth ? 1 : 0, pred ? 1 : 0);
        }
        report.per_fold.push_back({fold_id, "all", prf_from_counts(tp, fp, fn, tn)});
    }

    // Table-7 style protocol: each defect class tested separately against good
    std::set<int> defects;
    for (const auto& s : test)
        if (s.cls > 0) defects.insert(s.cls);
    for (int d : defects) {
        long long tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            if (test[i].cls != 0 && test[i].cls != d) continue;
            const bool truth = test[i].cls == d, pred = predicted_defect(i);
            if (truth && pred) ++tp;
            else if (!truth && pred) ++fp;
            else if (truth && !pred) ++fn;
            else ++tn;
        }
        report.per_fold.push_back(
            {fold_id, data::class_names()[d], prf_from_counts(tp, fp, fn, tn)});
    }
}

void finalize_report(EvalReport& report) {
    std::map<std::string, std::vector<const PrfScores*>> grouped;
    for (const auto& row : report.per_fold) grouped[row.defect].push_back(&row.scores);
    report.averages.clear();
    report.average_accuracy.clear();
    for (const auto& [name, rows] : grouped) {
        PrfScores avg;
        double acc = 0;
        for (const auto* s : rows) {
            avg.precision += s->precision;
            avg.recall += s->recall;
            avg.f_measure += s->f_measure;
            avg.tp += s->tp;
            avg.fp += s->fp;
            avg.fn += s->fn;
            avg.tn += s->tn;
            acc += s->accuracy();
        }
        const double n = static_cast<double>(rows.size());
        avg.precision /= n;
        avg.recall /= n;
        avg.f_measure /= n;
        report.averages[name] = avg;
        report.average_accuracy[name] = acc / n;
    }
}

EvalReport crossval(const std::string& method, const std::vector<Sample>& data,
                    const EvalOptions& opts) {
    std::vector<int> labels;
    labels.reserve(data.size());
    for (const auto& s : data) labels.push_back(s.cls);
    data::FoldPlan plan = data::stratified_kfold(labels, opts.k, opts.seed);

    EvalReport report;
    report.experiment_id = method;
    report.config = opts.config;

    // SVM features are fold-independent; extract once
    std::vector<std::vector<double>> raw_features;
    baseline::GaborBank bank;
    if (is_svm_method(method)) {
        if (method == "svm-gabor") bank = baseline::build_gabor_bank();
        raw_features.reserve(data.size());
        for (const auto& s : data)
            raw_features.push_back(method == "svm-gabor" ? gabor_vector(s.image, bank)
                                                         : lbphog_vector(s.image));
    }

    std::vector<double> roc_scores;
    std::vector<int> roc_truth;
    double detect_best = 0;

    for (std::size_t f = 0; f < opts.k; ++f) {
        auto train_idx = plan.train_indices(f, data.size());
        const auto& test_idx = plan.test_indices[f];
        std::vector<Sample> test;
        for (auto i : test_idx) test.push_back(data[i]);

        std::function<double(const Sample&)> score_fn;
        nn::Network<float> net;
        baseline::SvmModel svm;

        const double t0 = now_seconds();
        if (is_svm_method(method)) {
            std::vector<std::vector<double>> xs;
            std::vector<int> ys;
            for (auto i : train_idx) {
                xs.push_back(raw_features[i]);
                ys.push_back(data[i].cls > 0 ? 1 : -1);
            }
            if (method == "svm-gabor") {
                svm.reducer = baseline::fit_pca(xs, opts.energy_ratio);
                for (auto& x : xs) x = svm.reducer.project(x);
            }
            baseline::SvmHyper sh = opts.svm_hyper;
            sh.seed = opts.seed * 1000 + f;
            baseline::SvmModel trained = baseline::svm_train(xs, ys, sh);
            trained.reducer = svm.reducer;
            svm = std::move(trained);
            // svm_predict applies the reducer itself when one is fitted
            score_fn = [&](const Sample& s) {
                std::vector<double> x = method == "svm-gabor" ? gabor_vector(s.image, bank)
                                                              : lbphog_vector(s.image);
                return baseline::svm_predict(svm, x).margin;
            };
        } else {
            arch::BuildOptions bo;
            bo.input_side = opts.input_side;
            bo.dropout_rate = opts.hyper.dropout;
            bo.seed = opts.seed * 1000 + f + 1;
            net = arch::build<float>(method, 2, bo);
            nn::TrainSet<float> ts;
            for (auto i : train_idx) {
                ts.images.push_back(data[i].image);
                ts.labels.push_back(data[i].cls > 0 ? 1 : 0);
            }
            nn::Hyper hy = opts.hyper;
            hy.seed = opts.seed * 1000 + f + 1;
            nn::train(net, ts, hy);
            score_fn = [&](const Sample& s) {
                auto probs = arch::forward_classify(net, s.image);
                return static_cast<double>(probs[1]) - 0.5;  // sign rule at p = 0.5
            };
        }
        report.train_seconds += now_seconds() - t0;

        evaluate_split(score_fn, test, f, report,
                       opts.with_roc ? &roc_scores : nullptr,
                       opts.with_roc ? &roc_truth : nullptr);

        if (f == 0) {
            // detection timing on up to 100 held-out samples, min of 3 runs
            const std::size_t n = std::min<std::size_t>(100, test.size());
            const double d = timing_bench([&] {
                for (std::size_t i = 0; i < n; ++i) (void)score_fn(test[i]);
            });
            detect_best = d * (100.0 / static_cast<double>(n));
        }
    }

    report.detect_seconds_per_100 = detect_best;
    if (opts.with_roc) report.roc = roc_points(roc_scores, roc_truth);
    finalize_report(report);
    return report;
}

void write_summary_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + path);
    write_config_comment(out, report.config);
    out << "# experiment=" << report.experiment_id << "\n";
    out << "# train_seconds=" << report.train_seconds << "\n";
    out << "# detect_seconds_per_100=" << report.detect_seconds_per_100 << "\n";
    out << "fold,defect,precision,recall,f_measure\n";
    out.precision(6);
    out << std::fixed;
    for (const auto& row : report.per_fold)
        out << row.fold << "," << row.defect << "," << row.scores.precision << ","
            << row.scores.recall << "," << row.scores.f_measure << "\n";
    for (const auto& [name, avg] : report.averages)
        out << "AVR," << name << "," << avg.precision << "," << avg.recall << ","
            << avg.f_measure << "\n";
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::string& path,
                         const std::string& config) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + path);
    write_config_comment(out, config);
    for (std::size_t t = 0; t < cm.k; ++t) {
        for (std::size_t p = 0; p < cm.k; ++p)
            out << cm.at(t, p) << (p + 1 < cm.k ? "," : "\n");
    }
}

void write_roc_csv(const RocCurve& curve, const std::string& path,
                   const std::string& config) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + path);
    write_config_comment(out, config);
    out << "threshold,fpr,tpr\n";
    out.precision(10);
    for (const auto& p : curve.points)
        out << p.threshold << "," << p.fpr << "," << p.tpr << "\n";
    out << "# auc=" << std::fixed << std::setprecision(4) << curve.auc << "\n";
}

std::vector<std::string> activation_dump(nn::Network<float>& net, const TensorF& image,
                                         const std::string& layer,
                                         const std::string& outdir) {
    if (layer != "L1" && layer != "L3")
        throw std::invalid_argument("activation_dump: layer must be L1 or L3");
    fs::create_directories(outdir);
    std::vector<std::string> files;
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        TensorF x = net.is_multispectral() ? nn::extract_plane(image, b) : image;
        TensorF pick;
        std::size_t relu_seen = 0, relu_total = 0;
        for (const auto& step : net.branches[b])
            if (std::holds_alternative<nn::ReluStep>(step)) ++relu_total;
        for (const auto& step : net.branches[b]) {
            if (const auto* conv = std::get_if<nn::ConvLayer<float>>(&step)) {
                x = nn::conv2d_forward(x, *conv);
            } else if (std::holds_alternative<nn::ReluStep>(step)) {
                x = nn::relu_forward(x);
                ++relu_seen;
                if ((layer == "L1" && relu_seen == 1) ||
                    (layer == "L3" && relu_seen == relu_total)) {
                    pick = x;
                }
            } else {
                x = nn::maxpool2d_forward(x);
            }
        }
        const std::string branch_tag =
            net.is_multispectral() ? std::string(1, "rgb"[b]) : std::string("rgb");
        const std::size_t H = pick.dims[0], W = pick.dims[1], C = pick.dims[2];
        for (std::size_t c = 0; c < C; ++c) {
            float lo = pick.at(0, 0, c), hi = lo;
            for (std::size_t pos = 0; pos < H * W; ++pos) {
                const float v = pick.data[pos * C + c];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            std::vector<std::uint8_t> gray(H * W, 0);
            if (hi > lo) {
                for (std::size_t pos = 0; pos < H * W; ++pos)
                    gray[pos] = static_cast<std::uint8_t>(
                        255.0f * (pick.data[pos * C + c] - lo) / (hi - lo));
            }
            const std::string name =
                layer + "_" + branch_tag + "_" + std::to_string(c) + ".pgm";
            const std::string full = (fs::path(outdir) / name).string();
            data::save_pgm(gray, W, H, full);
            files.push_back(full);
        }
    }
    return files;
}

double timing_bench(const std::function<void()>& run, int runs) {
    double best = 0;
    for (int i = 0; i < runs; ++i) {
        const double t0 = now_seconds();
        run();
        const double dt = now_seconds() - t0;
        if (i == 0 || dt < best) best = dt;
    }
    return best;
}

}  // namespace sdi::eval
