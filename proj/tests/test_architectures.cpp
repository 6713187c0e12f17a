#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "sdi/architectures.hpp"
#include "sdi/model_io.hpp"
#include "sdi/trainer.hpp"

using namespace sdi;
using namespace sdi::nn;

namespace {

std::vector<std::pair<std::string, std::vector<std::size_t>>> trace_of(
    const std::string& id, std::size_t side = 256) {
    arch::BuildOptions opts;
    opts.input_side = side;
    auto net = arch::build<float>(id, 2, opts);
    std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
    for (const auto& e : arch::shape_trace(net)) out.emplace_back(e.name, e.dims);
    return out;
}

std::size_t conv_param_count(Network<float>& net) {
    auto ps = net.params();
    std::size_t n = 0;
    for (std::size_t i = 0; i + 6 < ps.size(); ++i) n += ps[i]->size();
    return n;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("deep structure layer shapes at 256") {
    auto got = trace_of("s3");
    decltype(got) want = {
        {"conv1", {256, 256, 16}}, {"pool1", {128, 128, 16}},
        {"conv2", {128, 128, 32}}, {"conv3", {128, 128, 32}},
        {"pool2", {64, 64, 32}},   {"conv4", {64, 64, 64}},
        {"conv5", {64, 64, 64}},   {"pool3", {32, 32, 64}},
    };
    CHECK(got == want);
    CHECK(trace_of("s2") == want);  // same layout, smaller kernels
}

TEST_CASE("shallow structure layer shapes at 256") {
    auto got = trace_of("s1");
    decltype(got) want = {
        {"conv1", {256, 256, 16}}, {"pool1", {128, 128, 16}},
        {"conv2", {128, 128, 32}}, {"pool2", {64, 64, 32}},
        {"conv3", {64, 64, 32}},   {"pool3", {32, 32, 32}},
    };
    CHECK(got == want);
}

TEST_CASE("multispectral trace ends in a 192-channel concatenation") {
    auto got = trace_of("ms");
    REQUIRE(!got.empty());
    CHECK(got.back().first == "concat");
    CHECK(got.back().second == std::vector<std::size_t>{32, 32, 192});
    // branch shapes are the single-spectrum deep structure
    got.pop_back();
    CHECK(got == trace_of("s3"));
}

TEST_CASE("kernel sizes follow the structure plans") {
    auto ks = [](const std::string& id) {
        auto net = arch::build<float>(id, 2);
        std::vector<std::size_t> out;
        for (const auto& step : net.branches[0])
            if (const auto* c = std::get_if<ConvLayer<float>>(&step))
                out.push_back(c->ksize());
        return out;
    };
    CHECK(ks("s1") == std::vector<std::size_t>{3, 3, 3});
    CHECK(ks("s2") == std::vector<std::size_t>{3, 3, 3, 3, 3});
    CHECK(ks("s3") == std::vector<std::size_t>{7, 5, 5, 3, 3});
    CHECK(ks("ms") == std::vector<std::size_t>{7, 5, 5, 3, 3});
}

TEST_CASE("convolution parameter counts are exact and ordered") {
    auto s1 = arch::build<float>("s1", 2);
    auto s2 = arch::build<float>("s2", 2);
    auto s3 = arch::build<float>("s3", 2);
    auto ms = arch::build<float>("ms", 2);
    // per-layer kernels + bias, RGB input
    CHECK(conv_param_count(s1) == (16 * 3 * 9 + 16) + (32 * 16 * 9 + 32) + (32 * 32 * 9 + 32));
    CHECK(conv_param_count(s3) == (16 * 3 * 49 + 16) + (32 * 16 * 25 + 32) +
                                      (32 * 32 * 25 + 32) + (64 * 32 * 9 + 64) +
                                      (64 * 64 * 9 + 64));
    CHECK(conv_param_count(s1) < conv_param_count(s2));
    CHECK(conv_param_count(s2) < conv_param_count(s3));
    // three single-plane branches: first conv reads 1 channel instead of 3
    const std::size_t s3_single = conv_param_count(s3) - 16 * 2 * 49;
    CHECK(conv_param_count(ms) == 3 * s3_single);
}

TEST_CASE("unknown structure id and bad class count are rejected") {
    CHECK_THROWS_AS(arch::build<float>("s4", 2), std::invalid_argument);
    CHECK_THROWS_AS(arch::build<float>("s1", 3), std::invalid_argument);
    CHECK_THROWS_AS(arch::build<float>("ms", 0), std::invalid_argument);
}

TEST_CASE("fc head dimensions follow the options") {
    arch::BuildOptions opts;
    opts.input_side = 64;
    opts.fc1_units = 64;
    opts.fc2_units = 32;
    auto net = arch::build<float>("s3", 7, opts);
    // 64 -> 32 -> 16 -> 8 through three pools, 64 channels
    CHECK(net.fc1.weights.dims == std::vector<std::size_t>{64, 8 * 8 * 64});
    CHECK(net.fc2.weights.dims == std::vector<std::size_t>{32, 64});
    CHECK(net.fc_out.weights.dims == std::vector<std::size_t>{7, 32});
}

TEST_CASE("multispectral branch outputs equal standalone branch runs") {
    arch::BuildOptions opts;
    opts.input_side = 16;
    opts.fc1_units = 8;
    opts.fc2_units = 6;
    opts.seed = 9;
    auto net = arch::build<float>("ms", 2, opts);
    Rng rng(10);
    TensorF image({16, 16, 3});
    for (auto& v : image.data) v = static_cast<float>(rng.uniform());
    Rng fr(1);
    auto tr = forward(net, image, Mode::EVAL, fr);
    REQUIRE(tr.branch_outputs.size() == 3);
    for (std::size_t b = 0; b < 3; ++b) {
        auto plane = extract_plane(image, b);
        auto feat = run_branch<float>(net.branches[b], plane, nullptr);
        CHECK(feat.dims == tr.branch_outputs[b].dims);
        CHECK(feat.data == tr.branch_outputs[b].data);
    }
}

TEST_CASE("channel concatenation inverts plane extraction") {
    Rng rng(12);
    std::vector<TensorF> parts;
    for (int b = 0; b < 3; ++b) {
        TensorF t({4, 5, 2});
        for (auto& v : t.data) v = static_cast<float>(rng.normal());
        parts.push_back(std::move(t));
    }
    TensorF cat = concat_channels(parts);
    CHECK(cat.dims == std::vector<std::size_t>{4, 5, 6});
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 5; ++x)
                for (std::size_t c = 0; c < 2; ++c)
                    CHECK(cat.at(y, x, b * 2 + c) == parts[b].at(y, x, c));

    TensorF img({3, 3, 3});
    for (auto& v : img.data) v = static_cast<float>(rng.normal());
    for (std::size_t c = 0; c < 3; ++c) {
        auto plane = extract_plane(img, c);
        CHECK(plane.dims == std::vector<std::size_t>{3, 3, 1});
        for (std::size_t y = 0; y < 3; ++y)
            for (std::size_t x = 0; x < 3; ++x)
                CHECK(plane.at(y, x, 0) == img.at(y, x, c));
    }
}

TEST_CASE("probabilities have class-count length and sum to one") {
    arch::BuildOptions opts;
    opts.input_side = 16;
    opts.fc1_units = 8;
    opts.fc2_units = 6;
    auto net = arch::build<float>("s1", 7, opts);
    Rng rng(2);
    TensorF image({16, 16, 3});
    for (auto& v : image.data) v = static_cast<float>(rng.uniform());
    auto probs = arch::forward_classify(net, image);
    REQUIRE(probs.size() == 7);
    float sum = 0;
    for (float p : probs) {
        CHECK(p >= 0.0f);
        sum += p;
    }
    CHECK(std::abs(sum - 1.0f) < 1e-5f);
}

TEST_CASE("init spread follows the fan-in rule") {
    auto net = arch::build<float>("s1", 2, {});
    const auto* conv = std::get_if<ConvLayer<float>>(&net.branches[0][0]);
    REQUIRE(conv);
    double sq = 0;
    for (float v : conv->kernels.data) sq += static_cast<double>(v) * v;
    const double std_got = std::sqrt(sq / conv->kernels.size());
    const double std_want = std::sqrt(2.0 / (3 * 3 * 3));
    CHECK(std_got == doctest::Approx(std_want).epsilon(0.2));
    for (float v : conv->bias.data) CHECK(v == 0.0f);
}

TEST_CASE("model files survive a save/load/save round trip byte for byte") {
    arch::BuildOptions opts;
    opts.input_side = 16;
    opts.fc1_units = 8;
    opts.fc2_units = 6;
    opts.seed = 21;
    auto net = arch::build<float>("ms", 2, opts);
    const std::string p1 = "tmp_model_a.sdm", p2 = "tmp_model_b.sdm";
    io::save_model(net, p1, "trial run");
    std::string meta;
    auto loaded = io::load_model(p1, &meta);
    CHECK(meta == "trial run");
    CHECK(loaded.arch_id == "ms");
    CHECK(loaded.num_classes == 2);
    CHECK(loaded.input_side == 16);
    io::save_model(loaded, p2, "trial run");
    CHECK(slurp(p1) == slurp(p2));

    // loaded parameters are bit-identical
    auto pa = net.params();
    auto pb = loaded.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->data == pb[i]->data);

    // and so are eval outputs
    Rng rng(5);
    TensorF image({16, 16, 3});
    for (auto& v : image.data) v = static_cast<float>(rng.uniform());
    CHECK(arch::forward_classify(net, image) == arch::forward_classify(loaded, image));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("corrupted payload bytes fail the checksum") {
    arch::BuildOptions opts;
    opts.input_side = 16;
    opts.fc1_units = 4;
    opts.fc2_units = 3;
    auto net = arch::build<float>("s1", 2, opts);
    const std::string path = "tmp_model_c.sdm";
    io::save_model(net, path);
    auto bytes = slurp(path);
    bytes[bytes.size() / 2] ^= 0x40;
    std::ofstream(path, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(io::load_model(path), io::ModelIoError);
    std::remove(path.c_str());
}

TEST_CASE("truncated and non-model files are rejected") {
    arch::BuildOptions opts;
    opts.input_side = 16;
    opts.fc1_units = 4;
    opts.fc2_units = 3;
    auto net = arch::build<float>("s1", 2, opts);
    const std::string path = "tmp_model_d.sdm";
    io::save_model(net, path);
    auto bytes = slurp(path);
    std::ofstream(path, std::ios::binary).write(bytes.data(), bytes.size() / 2);
    CHECK_THROWS_AS(io::load_model(path), io::ModelIoError);
    std::ofstream(path, std::ios::binary).write("PK\x03\x04 not a model", 17);
    CHECK_THROWS_AS(io::load_model(path), io::ModelIoError);
    CHECK_THROWS_AS(io::load_model("no_such_file.sdm"), io::ModelIoError);
    std::remove(path.c_str());
}

TEST_CASE("different structures produce distinct arch ids on disk") {
    for (const std::string id : {"s1", "s2", "s3", "ms"}) {
        arch::BuildOptions opts;
        opts.input_side = 16;
        opts.fc1_units = 4;
        opts.fc2_units = 3;
        auto net = arch::build<float>(id, 2, opts);
        const std::string path = "tmp_model_" + id + ".sdm";
        io::save_model(net, path);
        auto mf = io::load_model_file(path);
        CHECK(mf.arch_id == id);
        std::remove(path.c_str());
    }
}

TEST_CASE("a small net overfits a two-image task") {
    arch::BuildOptions opts;
    opts.input_side = 16;
    opts.fc1_units = 16;
    opts.fc2_units = 8;
    opts.seed = 33;
    auto net = arch::build<float>("s1", 2, opts);
    net.dropout_rate = 0.0;
    TrainSet<float> data;
    Rng rng(34);
    for (int i = 0; i < 2; ++i) {
        TensorF img({16, 16, 3});
        for (auto& v : img.data)
            v = static_cast<float>(rng.uniform() * 0.2 + (i ? 0.6 : 0.1));
        data.images.push_back(std::move(img));
        data.labels.push_back(i);
    }
    Hyper hy;
    hy.iterations = 200;
    hy.batch_size = 2;
    hy.eta = 1e-2;
    hy.seed = 35;
    train(net, data, hy);
    CHECK(training_accuracy(net, data) == doctest::Approx(1.0));
}
