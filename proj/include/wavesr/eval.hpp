#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wavesr/config.hpp"
#include "wavesr/data.hpp"
#include "wavesr/metrics.hpp"
#include "wavesr/model.hpp"

namespace wsr {

/// out(y, x) = in(floor(y h / H), floor(x w / W)).
Tensor upsample_nearest(const Tensor& input, int out_h, int out_w);

struct EvalOptions {
    int max_frames = 0;                            // per scene, 0 = all
    std::optional<std::filesystem::path> dump_dir;  // tone-mapped PPMs
};

struct ScaleReport {
    float scale = 2.0f;
    int lr_height = 0, lr_width = 0, hr_height = 0, hr_width = 0;
    MetricReport model;
    MetricReport nearest;  // nearest-upsampled LR frame
};

/// Full-frame recurrent inference at scale s on every scene. The LR frame is
/// lr_extent(H, s) per side; the HR window is its top-left hr_extent region.
/// Frame 0 only seeds the history (bilinear upsample of its LR irradiance);
/// metrics cover frames 1.. on remodulated HDR.
ScaleReport evaluate_scale(const Model& model, const std::vector<std::vector<FrameRecord>>& scenes, float s,
                           const EvalOptions& opts = {});

/// "metrics_x2.00.txt" etc.
std::string metric_file_name(float scale, bool baseline);

/// Loads the checkpoint, checks its wavelet against the run config, evaluates
/// every scale in cfg.eval.scales on cfg.eval.split and writes one report per
/// scale plus the nearest baseline into cfg.out.
std::vector<ScaleReport> run_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                  std::ostream* progress = nullptr);

/// Writes an 8-bit binary PPM of a 3 x H x W image in [0, 1].
void write_ppm(const std::filesystem::path& path, const Tensor& rgb);

// Ablation sweep.
struct AblationRow {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
    double final_loss = 0.0;  // mean total loss over the last min(20, steps) steps
};

/// Trains each cfg.ablate.configs entry from scratch with the shared seed and
/// step budget, then evaluates at cfg.ablate.scale. Throws ConfigError naming
/// the first config that fails.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::ostream* progress = nullptr);
AblationRow run_ablation_row(const RunConfig& cfg, const std::string& name,
                             const std::vector<std::vector<FrameRecord>>& train,
                             const std::vector<std::vector<FrameRecord>>& test);
std::string format_ablation_table(const std::vector<AblationRow>& rows, std::uint64_t seed, int steps, float scale);

}  // namespace wsr
