#pragma once

#include <map>

#include "sdi/dataset.hpp"

namespace sdi::data {

/// Per-class, per-channel defect contrast in [0,1]; 0 makes the defect
/// invisible in that channel.
struct ChannelProfile {
    double r = 1.0, g = 1.0, b = 1.0;
};

struct SynthSpec {
    std::size_t side = 256;
    std::map<Defect, std::size_t> counts;
    std::size_t lattice_cells = 12;  // coarse lattice texture grid
    std::size_t line_pitch = 32;     // vertical grid-line spacing, pixels
    std::map<Defect, ChannelProfile> profiles;  // default: full contrast
    std::uint64_t seed = 1;

    void validate() const;
};

struct SynthImage {
    RgbImage clean;      // defect-free twin
    RgbImage defective;  // clean + injected defect (identical for good)
    Defect label = Defect::good;
};

/// One seeded image; `index` distinguishes images within a class.
SynthImage synth_image(Defect cls, const SynthSpec& spec, std::size_t index);

/// In-memory dataset (class-major, index-ordered).
std::vector<SynthImage> synth_dataset(const SynthSpec& spec);

/// Writes PPM images plus manifest.csv under out_dir.
DatasetManifest synth_generate(const SynthSpec& spec, const std::string& out_dir,
                               const std::string& config_comment = "");

}  // namespace sdi::data
