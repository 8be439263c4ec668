#include <algorithm>
#include <random>

#include "wavesr/data.hpp"
#include "wavesr/error.hpp"
#include "wavesr/ops.hpp"
#include "wavesr/scale.hpp"

namespace wsr {

namespace {

Tensor crop_region(const Tensor& t, int oy, int ox, int h, int w) {
    if (oy == 0 && ox == 0 && t.dim(1) == h && t.dim(2) == w) return t;
    const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
    if (oy < 0 || ox < 0 || oy + h > H || ox + w > W) {
        throw ShapeError("crop window exceeds frame " + shape_str(t.shape()));
    }
    Tensor out(Shape{C, h, w});
    auto src = t.data();
    auto dst = out.mutable_data();
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y)
            std::copy_n(src.begin() + (static_cast<std::size_t>(c) * H + oy + y) * W + ox, w,
                        dst.begin() + (static_cast<std::size_t>(c) * h + y) * w);
    return out;
}

GBuffer crop_region(const GBuffer& g, int oy, int ox, int h, int w) {
    return {crop_region(g.albedo, oy, ox, h, w), crop_region(g.normal, oy, ox, h, w),
            crop_region(g.depth, oy, ox, h, w), crop_region(g.roughness, oy, ox, h, w),
            crop_region(g.metallic, oy, ox, h, w)};
}

}  // namespace

Tensor frame_irradiance(const FrameRecord& f) {
    NoGradGuard guard;
    return demodulate(f.hdr, compute_brdf_factor(f.gbuffer));
}

TrainingExample build_example(const std::vector<FrameRecord>& frames, int t, const Tensor& prev_irradiance,
                              int oy, int ox, int hr_h, int hr_w, int lr_h, int lr_w, float s,
                              const SamplerConfig& cfg) {
    if (t < 1 || t >= static_cast<int>(frames.size())) {
        throw ConfigError("build_example: frame " + std::to_string(t) + " has no predecessor");
    }
    NoGradGuard guard;
    const FrameRecord& cur = frames[t];
    const FrameRecord& prev = frames[t - 1];
    const int H = cur.hdr.dim(1), W = cur.hdr.dim(2);

    TrainingExample ex;
    ex.scale = s;
    ex.scene_id = cur.scene_id;
    ex.frame_index = t;
    ex.g_hr = crop_region(cur.gbuffer, oy, ox, hr_h, hr_w);
    const Tensor hdr_hr = crop_region(cur.hdr, oy, ox, hr_h, hr_w);
    const BrdfFactor f_hr = compute_brdf_factor(ex.g_hr);
    ex.brdf_hr = f_hr.f;
    ex.target = demodulate(hdr_hr, f_hr);

    const GBuffer g_lr = downsample_nearest_to(ex.g_hr, lr_h, lr_w);
    ex.l_lr = demodulate(downsample_nearest_to(hdr_hr, lr_h, lr_w), compute_brdf_factor(g_lr));

    if (prev_irradiance.dim(1) == H && prev_irradiance.dim(2) == W) {
        ex.l_prev_warped = crop_region(warp(prev_irradiance, cur.mv), oy, ox, hr_h, hr_w);
    } else if (prev_irradiance.dim(1) == hr_h && prev_irradiance.dim(2) == hr_w) {
        ex.l_prev_warped = warp(prev_irradiance, {crop_region(cur.mv.mv, oy, ox, hr_h, hr_w)});
    } else {
        throw ShapeError("build_example: history " + shape_str(prev_irradiance.shape()) +
                         " matches neither the frame nor the window");
    }
    const GBuffer g_prev = crop_region(warp(prev.gbuffer, cur.mv), oy, ox, hr_h, hr_w);
    const Tensor l_lr_up = upsample_bilinear(ex.l_lr, hr_h, hr_w);
    ex.masks = compute_masks(ex.g_hr, g_prev, ex.l_prev_warped, l_lr_up);
    if (cfg.use_wavelet) ex.target_coeffs = analyze(ex.target, cfg.wavelet);
    return ex;
}

TrainingExample sample_training_example(const std::vector<std::vector<FrameRecord>>& scenes, std::mt19937_64& rng,
                                        const SamplerConfig& cfg) {
    if (scenes.empty()) throw ConfigError("sampler: no scenes");
    std::uniform_int_distribution<std::size_t> pick_scene(0, scenes.size() - 1);
    const auto& frames = scenes[pick_scene(rng)];
    if (frames.size() < 2) throw ConfigError("sampler: scene needs at least 2 frames");
    const int H = frames[0].hdr.dim(1), W = frames[0].hdr.dim(2);
    if (cfg.patch > H || cfg.patch > W) {
        throw ConfigError("patch " + std::to_string(cfg.patch) + " is larger than the " + std::to_string(H) + "x" +
                          std::to_string(W) + " frame");
    }
    std::uniform_int_distribution<int> pick_frame(1, static_cast<int>(frames.size()) - 1);
    const int t = pick_frame(rng);
    float s = 2.0f;
    if (!cfg.single_scale) s = std::uniform_real_distribution<float>(cfg.scale_min, cfg.scale_max)(rng);
    s = std::clamp(s, cfg.single_scale ? 2.0f : cfg.scale_min, cfg.single_scale ? 2.0f : cfg.scale_max);

    const bool even = cfg.use_wavelet && cfg.wavelet.transform == Transform::dwt;
    const int lr = lr_extent(cfg.patch, s);
    if (lr < 8) throw ConfigError("patch " + std::to_string(cfg.patch) + " gives an LR side below 8 px");
    const int hr = std::min(hr_extent(lr, s, even), cfg.patch);
    const int oy = std::uniform_int_distribution<int>(0, H - hr)(rng);
    const int ox = std::uniform_int_distribution<int>(0, W - hr)(rng);
    return build_example(frames, t, frame_irradiance(frames[t - 1]), oy, ox, hr, hr, lr, lr, s, cfg);
}

}  // namespace wsr
