#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "wavesr/shading.hpp"
#include "wavesr/temporal.hpp"
#include "wavesr/tensor.hpp"
#include "wavesr/wavelet.hpp"

namespace wsr {

struct FrameRecord {
    Tensor hdr;  // 3 x H x W shaded frame, >= 0
    GBuffer gbuffer;
    MotionField mv;
    int frame_index = 0;
    std::string scene_id;

    // Generator-side ground truth. Not serialised; undefined after read_frame.
    Tensor irradiance;  // 3 x H x W, hdr == F * irradiance
    Tensor object_id;   // 1 x H x W, 0 = background
};

struct SceneSpec {
    std::uint64_t seed = 0;
    int num_frames = 24;
    int height = 128;
    int width = 128;
    int num_objects = 4;
    float tex_freq_min = 0.02f;  // cycles per pixel
    float tex_freq_max = 0.12f;
    float camera_speed = 0.6f;   // pixels per frame
    float object_speed = 1.2f;   // pixels per frame, upper bound
    float light_speed = 0.02f;   // radians per frame
    float light_intensity = 2.5f;

    /// Throws ConfigError for odd sizes, fewer than 2 frames or negative speeds.
    void validate() const;
};

std::vector<FrameRecord> generate_scene(const SceneSpec& spec, const std::string& scene_id = "scene_000");

/// Centre-aligned nearest pick: out(y,x) = in(floor((y+.5) s), floor((x+.5) s))
/// with h = floor(H/s). Throws ConfigError if s < 1 or h, w < 8.
Tensor downsample_nearest(const Tensor& in, float s);
/// Nearest pick onto an explicit h x w grid (per-axis ratio H/h, W/w).
Tensor downsample_nearest_to(const Tensor& in, int h, int w);
GBuffer downsample_nearest_to(const GBuffer& g, int h, int w);

// WSRF frame files.
inline constexpr char kFrameMagic[4] = {'W', 'S', 'R', 'F'};
inline constexpr std::uint32_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 20;
inline constexpr std::size_t kPlaneHeaderBytes = 20;  // 16-byte name + u32 channels

void write_frame(const std::filesystem::path& path, const FrameRecord& frame);
/// Throws FormatError (with byte offset) on bad magic, version, plane table
/// or truncation. frame_index / scene_id are left for the caller.
FrameRecord read_frame(const std::filesystem::path& path);
/// Expected file size for an H x W frame.
std::size_t frame_file_size(int height, int width);

// Dataset directory: scene_<id>/frame_<%05d>.wsrf plus a split manifest.
enum class Split { train, val, test };
std::string to_string(Split s);

struct SplitManifest {
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, Split>> scenes;
    std::vector<std::string> scenes_in(Split s) const;
};

inline constexpr const char* kManifestName = "split.txt";

/// Scene-level partition; depends only on (scene list, seed, ratios).
SplitManifest make_split(const std::vector<std::string>& scene_ids, std::uint64_t seed, double train_ratio,
                         double val_ratio);
void write_manifest(const std::filesystem::path& path, const SplitManifest& m);
SplitManifest read_manifest(const std::filesystem::path& path);

std::string scene_dir_name(int scene);
std::string frame_file_name(int frame);

struct DatasetSpec {
    int num_scenes = 3;
    SceneSpec scene;  // seed is replaced per scene
    std::uint64_t seed = 42;
    double train_ratio = 0.67;
    double val_ratio = 0.0;
};

struct DatasetSummary {
    int scenes = 0;
    int frames = 0;
};

DatasetSummary generate_dataset(const std::filesystem::path& root, const DatasetSpec& spec);

/// All frames of one scene, in order.
std::vector<FrameRecord> load_scene(const std::filesystem::path& root, const std::string& scene_id);

// Training examples.
struct SamplerConfig {
    int patch = 96;
    float scale_min = 2.0f;
    float scale_max = 4.0f;
    bool single_scale = false;  // every draw is 2.0
    bool use_wavelet = true;
    WaveletSpec wavelet{Transform::swt, Basis::haar, 1};
};

struct TrainingExample {
    float scale = 2.0f;
    Tensor l_lr;           // 3 x h x w demodulated LR irradiance
    GBuffer g_hr;          // HR patch G-buffer
    Tensor l_prev_warped;  // 3 x H x W previous HR irradiance warped to t
    MaskPair masks;
    Tensor target;         // 3 x H x W HR irradiance
    Tensor target_coeffs;  // packed subbands of target (wavelet configs)
    Tensor brdf_hr;        // 3 x H x W
    std::string scene_id;
    int frame_index = 0;
};

/// Builds the network inputs for frame t of `frames` (t >= 1) on the HR window
/// starting at (oy, ox) of size hr_h x hr_w, with LR size lr_h x lr_w. The
/// history is `prev_irradiance` (HR, full frame) warped by frame t's motion.
TrainingExample build_example(const std::vector<FrameRecord>& frames, int t, const Tensor& prev_irradiance,
                              int oy, int ox, int hr_h, int hr_w, int lr_h, int lr_w, float s,
                              const SamplerConfig& cfg);

/// Random scene, frame t >= 1, scale and crop. History is the warped
/// ground-truth previous irradiance.
TrainingExample sample_training_example(const std::vector<std::vector<FrameRecord>>& scenes, std::mt19937_64& rng,
                                        const SamplerConfig& cfg);

/// Demodulated irradiance of a stored frame.
Tensor frame_irradiance(const FrameRecord& f);

}  // namespace wsr
