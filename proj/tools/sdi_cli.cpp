// command line front end: datasets, training, evaluation, benchmarks
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sdi/architectures.hpp"
#include "sdi/dataset.hpp"
#include "sdi/evaluation.hpp"
#include "sdi/model_io.hpp"
#include "sdi/synth.hpp"
#include "sdi/trainer.hpp"

namespace fs = std::filesystem;
using namespace sdi;

namespace {

// sysexits-style process results
constexpr int kExitOk = 0;
constexpr int kExitUsage = 64;    // unknown command
constexpr int kExitConfig = 65;   // bad config or argument values
constexpr int kExitNumeric = 70;  // NaN or non-finite loss
constexpr int kExitIo = 74;       // missing or unreadable files

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key=value file; '#' starts a comment. Returned in file order.
std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
            line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("bad config line: " + line);
        out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

struct Common {
    std::uint64_t seed = 1;
    bool deterministic = false;
    std::string config_path;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "random seed recorded in every output");
    cmd->add_flag("--deterministic", c.deterministic,
                  "single-threaded bit-reproducible mode");
    cmd->add_option("--config", c.config_path, "key=value config file; flags override");
}

/// Applies config-file values for keys the command line left untouched.
void apply_config(CLI::App* cmd, const Common& c) {
    if (c.config_path.empty()) return;
    for (const auto& [key, value] : load_config_file(c.config_path)) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt) throw ConfigError("unknown config key: " + key);
        if (opt->count() > 0) continue;  // explicit flag wins
        try {
            opt->add_result(value);
            opt->run_callback();
        } catch (const CLI::Error&) {
            throw ConfigError("bad config value: " + key + "=" + value);
        }
    }
}

std::string fmt_config(const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < kv.size(); ++i)
        ss << kv[i].first << "=" << kv[i].second << (i + 1 < kv.size() ? "\n" : "");
    return ss.str();
}

std::string num(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

data::DatasetManifest load_any_manifest(const std::string& path) {
    if (!fs::exists(path)) throw IoError("dataset not found: " + path);
    try {
        if (fs::is_directory(path)) {
            if (fs::exists(fs::path(path) / "manifest.csv"))
                return data::load_manifest((fs::path(path) / "manifest.csv").string());
            return data::ingest_directory(path);
        }
        return data::load_manifest(path);
    } catch (const std::exception& e) {
        throw IoError(e.what());
    }
}

std::vector<eval::Sample> load_samples(const std::string& path, std::size_t side) {
    auto manifest = load_any_manifest(path);
    if (manifest.entries.empty()) throw IoError("empty dataset: " + path);
    std::vector<eval::Sample> out;
    for (const auto& e : manifest.entries) {
        eval::Sample s;
        try {
            s.image = data::resize(data::load_image(e.path), side);
        } catch (const std::exception& ex) {
            throw IoError(ex.what());
        }
        s.cls = static_cast<int>(e.label);
        out.push_back(std::move(s));
    }
    return out;
}

data::SynthSpec parse_synth_spec(std::size_t side, std::size_t count,
                                 const std::vector<std::string>& profiles,
                                 std::uint64_t seed) {
    data::SynthSpec spec;
    spec.side = side;
    spec.seed = seed;
    for (int c = 0; c < data::kNumClasses; ++c)
        spec.counts[static_cast<data::Defect>(c)] = count;
    for (const auto& p : profiles) {
        // class:r,g,b contrast triple
        const auto colon = p.find(':');
        if (colon == std::string::npos) throw ConfigError("bad profile: " + p);
        const auto cls = data::class_from_name(p.substr(0, colon));
        double r, g, b;
        char c1, c2;
        std::istringstream ss(p.substr(colon + 1));
        if (!(ss >> r >> c1 >> g >> c2 >> b) || c1 != ',' || c2 != ',')
            throw ConfigError("bad profile: " + p);
        spec.profiles[cls] = {r, g, b};
    }
    return spec;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"solar cell surface defect inspection toolkit"};
    app.require_subcommand(1);

    // ---- dataset split / dataset synth -----------------------------------
    auto* dataset = app.add_subcommand("dataset", "dataset construction");
    dataset->require_subcommand(1);

    auto* split = dataset->add_subcommand("split", "slide window patch extraction");
    Common split_c;
    std::string split_in, split_out;
    std::size_t split_window = 469, split_stride = 235;
    split->add_option("--in", split_in, "directory of <class>/<slide images>")->required();
    split->add_option("--out", split_out, "output patch directory")->required();
    split->add_option("--window", split_window, "window side, pixels");
    split->add_option("--stride", split_stride, "window step, pixels");
    add_common(split, split_c);

    auto* synth = dataset->add_subcommand("synth", "synthetic defect generator");
    Common synth_c;
    std::string synth_out;
    std::size_t synth_side = 256, synth_count = 10;
    std::vector<std::string> synth_profiles;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--side", synth_side, "image side, pixels");
    synth->add_option("--count", synth_count, "images per class");
    synth->add_option("--profile", synth_profiles,
                      "per-class channel contrast, class:r,g,b (repeatable)");
    add_common(synth, synth_c);

    // ---- train -----------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "fit one model, write a model file");
    Common train_c;
    std::string train_data, train_arch = "s3", train_out;
    std::size_t train_classes = 2, train_side = 256;
    nn::Hyper hy;
    train_cmd->add_option("--data", train_data, "manifest csv or dataset directory")->required();
    train_cmd->add_option("--arch", train_arch, "s1|s2|s3|ms");
    train_cmd->add_option("--out", train_out, "model file path")->required();
    train_cmd->add_option("--classes", train_classes, "2 (defect vs good) or 7");
    train_cmd->add_option("--input-side", train_side, "network input resolution");
    train_cmd->add_option("--eta", hy.eta, "SGD step size");
    train_cmd->add_option("--l2", hy.l2, "L2 strength");
    train_cmd->add_option("--dropout", hy.dropout, "dropout rate");
    train_cmd->add_option("--batch", hy.batch_size, "batch size");
    train_cmd->add_option("--iterations", hy.iterations, "SGD iterations");
    add_common(train_cmd, train_c);

    // ---- eval ------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on a dataset");
    Common eval_c;
    std::string eval_model, eval_data, eval_out;
    bool eval_roc = false;
    eval_cmd->add_option("--model", eval_model, "model file")->required();
    eval_cmd->add_option("--data", eval_data, "manifest csv or dataset directory")->required();
    eval_cmd->add_option("--out", eval_out, "output directory")->required();
    eval_cmd->add_flag("--roc", eval_roc, "also write roc.csv");
    add_common(eval_cmd, eval_c);

    // ---- crossval / baseline ---------------------------------------------
    auto add_study = [&](CLI::App* cmd, std::string& method, std::string& dataset_path,
                         std::string& outdir, eval::EvalOptions& opts, bool& with_roc,
                         Common& c) {
        cmd->add_option("--method", method, "s1|s2|s3|ms|svm-lbphog|svm-gabor")->required();
        cmd->add_option("--data", dataset_path, "manifest csv or dataset directory")->required();
        cmd->add_option("--out", outdir, "output directory")->required();
        cmd->add_option("--k", opts.k, "fold count");
        cmd->add_option("--input-side", opts.input_side, "network input resolution");
        cmd->add_option("--eta", opts.hyper.eta, "SGD step size");
        cmd->add_option("--l2", opts.hyper.l2, "L2 strength");
        cmd->add_option("--dropout", opts.hyper.dropout, "dropout rate");
        cmd->add_option("--batch", opts.hyper.batch_size, "batch size");
        cmd->add_option("--iterations", opts.hyper.iterations, "SGD iterations");
        cmd->add_option("--svm-lambda", opts.svm_hyper.lambda, "SVM regularization");
        cmd->add_option("--svm-iterations", opts.svm_hyper.iterations, "SVM iterations");
        cmd->add_option("--energy", opts.energy_ratio, "PCA energy preserving ratio");
        cmd->add_flag("--roc", with_roc, "also write roc.csv");
        add_common(cmd, c);
    };
    auto* cv_cmd = app.add_subcommand("crossval", "k-fold defect-vs-good study");
    Common cv_c;
    std::string cv_method, cv_data, cv_out;
    eval::EvalOptions cv_opts;
    bool cv_roc = false;
    add_study(cv_cmd, cv_method, cv_data, cv_out, cv_opts, cv_roc, cv_c);

    auto* base_cmd = app.add_subcommand("baseline", "classical feature + SVM study");
    Common base_c;
    std::string base_method, base_data, base_out;
    eval::EvalOptions base_opts;
    bool base_roc = false;
    add_study(base_cmd, base_method, base_data, base_out, base_opts, base_roc, base_c);

    // ---- roc -------------------------------------------------------------
    auto* roc_cmd = app.add_subcommand("roc", "roc curve of a saved model on a dataset");
    Common roc_c;
    std::string roc_model, roc_data, roc_out;
    roc_cmd->add_option("--model", roc_model, "model file")->required();
    roc_cmd->add_option("--data", roc_data, "manifest csv or dataset directory")->required();
    roc_cmd->add_option("--out", roc_out, "output csv path")->required();
    add_common(roc_cmd, roc_c);

    // ---- activations -----------------------------------------------------
    auto* act_cmd = app.add_subcommand("activations", "dump activation maps as pgm");
    Common act_c;
    std::string act_model, act_image, act_layer = "L1", act_out;
    act_cmd->add_option("--model", act_model, "model file")->required();
    act_cmd->add_option("--image", act_image, "input image")->required();
    act_cmd->add_option("--layer", act_layer, "L1 or L3");
    act_cmd->add_option("--out", act_out, "output directory")->required();
    add_common(act_cmd, act_c);

    // ---- bench -----------------------------------------------------------
    auto* bench_cmd = app.add_subcommand("bench", "forward pass timing");
    Common bench_c;
    std::string bench_arch = "s3";
    std::size_t bench_side = 256, bench_count = 10;
    int bench_runs = 3;
    bench_cmd->add_option("--arch", bench_arch, "s1|s2|s3|ms");
    bench_cmd->add_option("--input-side", bench_side, "network input resolution");
    bench_cmd->add_option("--count", bench_count, "images per timed run");
    bench_cmd->add_option("--runs", bench_runs, "repetitions, minimum wins");
    add_common(bench_cmd, bench_c);

    app.parse(argc, argv);

    if (split->parsed()) {
        apply_config(split, split_c);
        if (!fs::is_directory(split_in)) throw IoError("not a directory: " + split_in);
        const std::string config = fmt_config({{"command", "dataset split"},
                                               {"window", std::to_string(split_window)},
                                               {"stride", std::to_string(split_stride)},
                                               {"seed", std::to_string(split_c.seed)}});
        data::DatasetManifest manifest;
        for (const auto& cls_dir : fs::directory_iterator(split_in)) {
            if (!cls_dir.is_directory()) continue;
            data::Defect label;
            try {
                label = data::class_from_name(cls_dir.path().filename().string());
            } catch (const std::invalid_argument&) {
                continue;
            }
            const fs::path out_cls = fs::path(split_out) / cls_dir.path().filename();
            fs::create_directories(out_cls);
            std::vector<std::string> files;
            for (const auto& f : fs::directory_iterator(cls_dir.path()))
                if (f.is_regular_file()) files.push_back(f.path().string());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                data::RgbImage slide;
                try {
                    slide = data::load_image(f);
                } catch (const std::exception& e) {
                    throw IoError(e.what());
                }
                auto patches = data::slide_split(slide, split_window, split_stride);
                const std::string stem = fs::path(f).stem().string();
                for (const auto& p : patches) {
                    const std::string rel = (fs::path(cls_dir.path().filename()) /
                                             (stem + "_" + std::to_string(p.row) + "_" +
                                              std::to_string(p.col) + ".ppm"))
                                                .string();
                    data::save_ppm(p.patch, (fs::path(split_out) / rel).string());
                    manifest.entries.push_back(
                        {rel, label, {fs::path(f).filename().string(), p.row, p.col}});
                }
            }
        }
        if (manifest.entries.empty()) throw IoError("no class images under: " + split_in);
        data::save_manifest(manifest, (fs::path(split_out) / "manifest.csv").string(),
                            config);
        std::cout << "wrote " << manifest.entries.size() << " patches to " << split_out
                  << "\n";
        return kExitOk;
    }

    if (synth->parsed()) {
        apply_config(synth, synth_c);
        auto spec = parse_synth_spec(synth_side, synth_count, synth_profiles, synth_c.seed);
        const std::string config = fmt_config({{"command", "dataset synth"},
                                               {"side", std::to_string(synth_side)},
                                               {"count", std::to_string(synth_count)},
                                               {"seed", std::to_string(synth_c.seed)}});
        auto manifest = data::synth_generate(spec, synth_out, config);
        std::cout << "wrote " << manifest.entries.size() << " images to " << synth_out
                  << "\n";
        return kExitOk;
    }

    if (train_cmd->parsed()) {
        apply_config(train_cmd, train_c);
        if (train_classes != 2 && train_classes != 7)
            throw ConfigError("--classes must be 2 or 7");
        hy.seed = train_c.seed;
        hy.validate();
        auto samples = load_samples(train_data, train_side);
        nn::TrainSet<float> ts;
        for (auto& s : samples) {
            ts.images.push_back(std::move(s.image));
            ts.labels.push_back(train_classes == 2 ? (s.cls > 0 ? 1 : 0)
                                                   : static_cast<std::size_t>(s.cls));
        }
        arch::BuildOptions bo;
        bo.input_side = train_side;
        bo.dropout_rate = hy.dropout;
        bo.seed = train_c.seed;
        auto net = arch::build<float>(train_arch, train_classes, bo);
        auto stats = nn::train(net, ts, hy);
        const std::string config =
            fmt_config({{"command", "train"},
                        {"arch", train_arch},
                        {"classes", std::to_string(train_classes)},
                        {"input_side", std::to_string(train_side)},
                        {"eta", num(hy.eta)},
                        {"l2", num(hy.l2)},
                        {"dropout", num(hy.dropout)},
                        {"batch", std::to_string(hy.batch_size)},
                        {"iterations", std::to_string(hy.iterations)},
                        {"seed", std::to_string(train_c.seed)},
                        {"deterministic", train_c.deterministic ? "1" : "0"}});
        try {
            io::save_model(net, train_out, config);
        } catch (const std::exception& e) {
            throw IoError(e.what());
        }
        std::cout << "trained " << train_arch << " for " << stats.iterations_run
                  << " iterations, final loss " << stats.final_loss << ", model "
                  << train_out << "\n";
        return kExitOk;
    }

    auto load_model_or_die = [](const std::string& path, std::string* meta = nullptr) {
        try {
            return io::load_model(path, meta);
        } catch (const std::exception& e) {
            throw IoError(e.what());
        }
    };

    if (eval_cmd->parsed()) {
        apply_config(eval_cmd, eval_c);
        std::string meta;
        auto net = load_model_or_die(eval_model, &meta);
        if (net.num_classes != 2)
            throw ConfigError("eval expects a binary defect-vs-good model");
        auto samples = load_samples(eval_data, net.input_side);
        eval::EvalReport rep;
        rep.experiment_id = net.arch_id;
        rep.config = fmt_config({{"command", "eval"},
                                 {"model", eval_model},
                                 {"arch", net.arch_id},
                                 {"seed", std::to_string(eval_c.seed)}});
        std::vector<double> scores;
        std::vector<int> truth;
        eval::evaluate_split(
            [&](const eval::Sample& s) {
                return static_cast<double>(arch::forward_classify(net, s.image)[1]) - 0.5;
            },
            samples, 0, rep, &scores, &truth);
        eval::finalize_report(rep);
        fs::create_directories(eval_out);
        eval::write_summary_csv(rep, (fs::path(eval_out) / "summary.csv").string());
        eval::write_confusion_csv(rep.pooled_confusion,
                                  (fs::path(eval_out) / "confusion.csv").string(),
                                  rep.config);
        if (eval_roc)
            eval::write_roc_csv(eval::roc_points(scores, truth),
                                (fs::path(eval_out) / "roc.csv").string(), rep.config);
        std::cout << "evaluated " << samples.size() << " samples, f="
                  << rep.averages.at("all").f_measure << "\n";
        return kExitOk;
    }

    for (auto* cmd : {cv_cmd, base_cmd}) {
        if (!cmd->parsed()) continue;
        const bool is_base = cmd == base_cmd;
        Common& c = is_base ? base_c : cv_c;
        apply_config(cmd, c);
        const std::string method = is_base ? base_method : cv_method;
        const std::string dataset_path = is_base ? base_data : cv_data;
        const std::string outdir = is_base ? base_out : cv_out;
        eval::EvalOptions opts = is_base ? base_opts : cv_opts;
        opts.with_roc = is_base ? base_roc : cv_roc;
        opts.seed = c.seed;
        opts.hyper.seed = c.seed;
        if (is_base && !eval::is_svm_method(method))
            throw ConfigError("baseline expects svm-lbphog or svm-gabor");
        opts.config = fmt_config({{"command", is_base ? "baseline" : "crossval"},
                                  {"method", method},
                                  {"k", std::to_string(opts.k)},
                                  {"input_side", std::to_string(opts.input_side)},
                                  {"eta", num(opts.hyper.eta)},
                                  {"l2", num(opts.hyper.l2)},
                                  {"dropout", num(opts.hyper.dropout)},
                                  {"batch", std::to_string(opts.hyper.batch_size)},
                                  {"iterations", std::to_string(opts.hyper.iterations)},
                                  {"seed", std::to_string(c.seed)},
                                  {"deterministic", c.deterministic ? "1" : "0"}});
        auto samples = load_samples(dataset_path, opts.input_side);
        auto rep = eval::crossval(method, samples, opts);
        if (c.deterministic) {
            // wall clock is the one nondeterministic output field
            rep.train_seconds = 0;
            rep.detect_seconds_per_100 = 0;
        }
        fs::create_directories(outdir);
        eval::write_summary_csv(rep, (fs::path(outdir) / "summary.csv").string());
        eval::write_confusion_csv(rep.pooled_confusion,
                                  (fs::path(outdir) / "confusion.csv").string(),
                                  rep.config);
        if (rep.roc)
            eval::write_roc_csv(*rep.roc, (fs::path(outdir) / "roc.csv").string(),
                                rep.config);
        std::cout << method << " " << opts.k << "-fold f=" << rep.averages.at("all").f_measure
                  << " train_s=" << rep.train_seconds
                  << " detect_s_per_100=" << rep.detect_seconds_per_100 << "\n";
        return kExitOk;
    }

    if (roc_cmd->parsed()) {
        apply_config(roc_cmd, roc_c);
        auto net = load_model_or_die(roc_model);
        if (net.num_classes != 2)
            throw ConfigError("roc expects a binary defect-vs-good model");
        auto samples = load_samples(roc_data, net.input_side);
        std::vector<double> scores;
        std::vector<int> truth;
        for (const auto& s : samples) {
            scores.push_back(static_cast<double>(arch::forward_classify(net, s.image)[1]) -
                             0.5);
            truth.push_back(s.cls > 0 ? 1 : 0);
        }
        auto curve = eval::roc_points(scores, truth);
        eval::write_roc_csv(curve, roc_out,
                            fmt_config({{"command", "roc"},
                                        {"model", roc_model},
                                        {"seed", std::to_string(roc_c.seed)}}));
        std::cout << "auc=" << curve.auc << " points=" << curve.points.size() << "\n";
        return kExitOk;
    }

    if (act_cmd->parsed()) {
        apply_config(act_cmd, act_c);
        auto net = load_model_or_die(act_model);
        eval::Sample s;
        try {
            s.image = data::resize(data::load_image(act_image), net.input_side);
        } catch (const std::exception& e) {
            throw IoError(e.what());
        }
        auto files = eval::activation_dump(net, s.image, act_layer, act_out);
        std::cout << "wrote " << files.size() << " maps to " << act_out << "\n";
        return kExitOk;
    }

    if (bench_cmd->parsed()) {
        apply_config(bench_cmd, bench_c);
        if (bench_runs < 1) throw ConfigError("--runs must be positive");
        arch::BuildOptions bo;
        bo.input_side = bench_side;
        bo.seed = bench_c.seed;
        auto net = arch::build<float>(bench_arch, 2, bo);
        Rng rng(bench_c.seed);
        TensorF image({bench_side, bench_side, 3});
        for (auto& v : image.data) v = static_cast<float>(rng.uniform());
        const double secs = eval::timing_bench(
            [&] {
                for (std::size_t i = 0; i < bench_count; ++i)
                    arch::forward_classify(net, image);
            },
            bench_runs);
        std::cout << "arch=" << bench_arch << " side=" << bench_side
                  << " seconds_per_100=" << secs * 100.0 / static_cast<double>(bench_count)
                  << "\n";
        return kExitOk;
    }

    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << e.what() << "\n";
        return kExitOk;
    } catch (const CLI::ExtrasError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CLI::RequiredError& e) {
        // a missing subcommand is a usage error; a missing option is config
        std::cerr << "error: " << (std::string(e.what()).find("subcommand") != std::string::npos
                                       ? "usage: "
                                       : "config: ")
                  << e.what() << "\n";
        return std::string(e.what()).find("subcommand") != std::string::npos ? kExitUsage
                                                                             : kExitConfig;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return kExitIo;
    } catch (const data::ImageError& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return kExitIo;
    } catch (const io::ModelIoError& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return kExitIo;
    } catch (const nn::NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return kExitIo;
    }
}
