#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wavesr/data.hpp"
#include "wavesr/loss.hpp"
#include "wavesr/model.hpp"

namespace wsr {

struct TrainConfig {
    int steps = 200;
    int batch = 4;
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    bool cosine = false;
    int checkpoint_every = 50;  // 0 = only at the end
    int patch = 96;
    bool single_scale = false;
};

struct EvalConfig {
    std::vector<float> scales{2.0f};
    bool dump_images = false;
    std::string split = "test";
    int max_frames = 0;  // 0 = every frame
};

struct BenchConfig {
    int warmup = 2;
    int iterations = 10;
    int height = 128;
    int width = 128;
    float scale = 2.0f;
    std::vector<std::string> configs{"no_wavelet", "dwt_haar", "swt_haar"};
};

struct AblateConfig {
    std::vector<std::string> configs{"no_wavelet", "dwt_haar", "swt_haar", "swt_sym4", "swt_db4",
                                     "fusion_ll",  "multi_inr", "single_scale"};
    int steps = 200;
    float scale = 2.0f;
};

struct RunConfig {
    std::optional<std::uint64_t> seed;
    std::filesystem::path out = "runs/default";
    std::filesystem::path data_dir = "data";
    DatasetSpec data;
    ModelConfig model;
    TrainConfig train;
    LossWeights loss;
    EvalConfig eval;
    BenchConfig bench;
    AblateConfig ablate;

    /// Throws ConfigError when no seed was configured.
    std::uint64_t require_seed() const;
    /// Cross-section checks run before any work starts.
    void validate() const;
    SamplerConfig sampler() const;
};

/// `[section]` headers and `key = value` lines; `#` and `;` start comments.
/// Unknown sections or keys throw ConfigError naming them.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Named ablation rows: no_wavelet, dwt_haar, swt_haar, swt_sym4, swt_db4,
/// fusion_ll, multi_inr, single_scale. Applied on top of `base`.
RunConfig apply_preset(const RunConfig& base, const std::string& name);
const std::vector<std::string>& preset_names();

/// "2,3,4" or "all".
std::vector<float> parse_scales(const std::string& s);

}  // namespace wsr
