#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdi/network.hpp"

namespace sdi::io {

/// Binary model container: magic "SDMF", version, architecture id, class
/// count, free-form metadata text, per-tensor shape headers, little-endian
/// float32 payload, trailing CRC32.
struct ModelFile {
    std::string arch_id;
    std::uint32_t num_classes = 0;
    std::uint32_t input_side = 0;
    std::uint32_t fc1_units = 0;
    std::uint32_t fc2_units = 0;
    double dropout_rate = 0.0;
    std::string metadata;
    std::vector<TensorF> tensors;
};

struct ModelIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void save_model_file(const ModelFile& mf, const std::string& path);
ModelFile load_model_file(const std::string& path);

void save_model(nn::Network<float>& net, const std::string& path,
                const std::string& metadata = "");
nn::Network<float> load_model(const std::string& path, std::string* metadata = nullptr);

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace sdi::io
