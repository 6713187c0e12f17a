#include "sdi/model_io.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "sdi/architectures.hpp"

namespace sdi::io {

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'D', 'M', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void put_str(std::vector<std::uint8_t>& buf, const std::string& s) {
    put_u32(buf, static_cast<std::uint32_t>(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
}

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw ModelIoError("truncated model file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(&buf[pos]), n);
        pos += n;
        return s;
    }
};

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = seed ^ 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

void save_model_file(const ModelFile& mf, const std::string& path) {
    std::vector<std::uint8_t> body;
    put_u32(body, kVersion);
    put_str(body, mf.arch_id);
    put_u32(body, mf.num_classes);
    put_u32(body, mf.input_side);
    put_u32(body, mf.fc1_units);
    put_u32(body, mf.fc2_units);
    put_f64(body, mf.dropout_rate);
    put_str(body, mf.metadata);
    put_u32(body, static_cast<std::uint32_t>(mf.tensors.size()));
    for (const auto& t : mf.tensors) {
        put_u32(body, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.dims) put_u32(body, static_cast<std::uint32_t>(d));
    }
    for (const auto& t : mf.tensors) {
        static_assert(sizeof(float) == 4);
        for (float v : t.data) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(body, bits);  // little-endian float payload
        }
    }
    put_u32(body, crc32(body.data(), body.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelIoError("cannot open for write: " + path);
    out.write(kMagic.data(), kMagic.size());
    out.write(reinterpret_cast<const char*>(body.data()),
              static_cast<std::streamsize>(body.size()));
    if (!out) throw ModelIoError("write failed: " + path);
}

ModelFile load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelIoError("cannot open: " + path);
    std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (raw.size() < 8 || std::memcmp(raw.data(), kMagic.data(), 4) != 0)
        throw ModelIoError("bad magic: " + path);
    std::vector<std::uint8_t> body(raw.begin() + 4, raw.end() - 4);
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<std::uint32_t>(raw[raw.size() - 4 + i]) << (8 * i);
    if (crc32(body.data(), body.size()) != stored)
        throw ModelIoError("checksum mismatch: " + path);

    Reader r{body};
    if (r.u32() != kVersion) throw ModelIoError("unsupported format version");
    ModelFile mf;
    mf.arch_id = r.str();
    mf.num_classes = r.u32();
    mf.input_side = r.u32();
    mf.fc1_units = r.u32();
    mf.fc2_units = r.u32();
    mf.dropout_rate = r.f64();
    mf.metadata = r.str();
    const std::uint32_t ntensors = r.u32();
    std::vector<std::vector<std::size_t>> shapes;
    for (std::uint32_t i = 0; i < ntensors; ++i) {
        const std::uint32_t rank = r.u32();
        std::vector<std::size_t> dims;
        for (std::uint32_t d = 0; d < rank; ++d) dims.push_back(r.u32());
        shapes.push_back(std::move(dims));
    }
    for (auto& dims : shapes) {
        TensorF t(dims);
        for (auto& v : t.data) {
            const std::uint32_t bits = r.u32();
            std::memcpy(&v, &bits, 4);
        }
        mf.tensors.push_back(std::move(t));
    }
    return mf;
}

void save_model(nn::Network<float>& net, const std::string& path,
                const std::string& metadata) {
    ModelFile mf;
    mf.arch_id = net.arch_id;
    mf.num_classes = static_cast<std::uint32_t>(net.num_classes);
    mf.input_side = static_cast<std::uint32_t>(net.input_side);
    mf.fc1_units = static_cast<std::uint32_t>(net.fc1.fan_out());
    mf.fc2_units = static_cast<std::uint32_t>(net.fc2.fan_out());
    mf.dropout_rate = net.dropout_rate;
    mf.metadata = metadata;
    for (auto* t : net.params()) mf.tensors.push_back(*t);
    save_model_file(mf, path);
}

nn::Network<float> load_model(const std::string& path, std::string* metadata) {
    ModelFile mf = load_model_file(path);
    arch::BuildOptions opts;
    opts.input_side = mf.input_side;
    opts.fc1_units = mf.fc1_units;
    opts.fc2_units = mf.fc2_units;
    opts.dropout_rate = mf.dropout_rate;
    opts.seed = 0;
    nn::Network<float> net;
    try {
        net = arch::build<float>(mf.arch_id, mf.num_classes, opts);
    } catch (const std::invalid_argument& e) {
        throw ModelIoError(std::string("cannot rebuild architecture: ") + e.what());
    }
    auto params = net.params();
    if (params.size() != mf.tensors.size())
        throw ModelIoError("tensor count does not match architecture");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->dims != mf.tensors[i].dims)
            throw ModelIoError("tensor shape does not match architecture");
        *params[i] = mf.tensors[i];
    }
    if (metadata) *metadata = mf.metadata;
    return net;
}

}  // namespace sdi::io
