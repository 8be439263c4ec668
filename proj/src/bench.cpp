#include "wavesr/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "wavesr/data.hpp"
#include "wavesr/error.hpp"
#include "wavesr/ops.hpp"
#include "wavesr/scale.hpp"

namespace wsr {

void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

std::vector<BenchResult> run_bench(const std::vector<NamedModel>& models, const BenchConfig& cfg,
                                   std::uint64_t seed) {
    if (cfg.iterations < 1) throw ConfigError("need at least one timed iteration");
    if (cfg.warmup < 0) throw ConfigError("bench.warmup must be non-negative");
    if (models.empty()) throw ConfigError("bench: no models");
    for (const auto& m : models) {
        const ModelConfig& mc = m.model->config();
        if (!(cfg.scale >= mc.scale_min && cfg.scale <= mc.scale_max)) {
            throw ConfigError("bench scale outside the range of model '" + m.name + "'");
        }
    }

    SceneSpec spec;
    spec.seed = seed;
    spec.num_frames = 2;
    spec.height = cfg.height;
    spec.width = cfg.width;
    const auto frames = generate_scene(spec);

    // Even HR sides so decimated and stationary configs see the same input.
    const int lr_h = lr_extent(cfg.height, cfg.scale), lr_w = lr_extent(cfg.width, cfg.scale);
    if (lr_h < 8 || lr_w < 8) throw ConfigError("bench resolution too small for the scale");
    const int hr_h = hr_extent(lr_h, cfg.scale, true), hr_w = hr_extent(lr_w, cfg.scale, true);
    if (hr_h > cfg.height || hr_w > cfg.width) throw ConfigError("bench resolution too small for the scale");
    SamplerConfig sc;
    sc.use_wavelet = false;
    const TrainingExample ex =
        build_example(frames, 1, frame_irradiance(frames[0]), 0, 0, hr_h, hr_w, lr_h, lr_w, cfg.scale, sc);
    const ModelInputs in{ex.l_lr, ex.g_hr, ex.l_prev_warped, ex.masks, cfg.scale};

    NoGradGuard guard;
    std::vector<BenchResult> results(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) results[i].name = models[i].name;
    for (int it = 0; it < cfg.warmup + cfg.iterations; ++it) {
        // Rotate the start so no config always runs right after another.
        for (std::size_t j = 0; j < models.size(); ++j) {
            const std::size_t i = (j + static_cast<std::size_t>(it)) % models.size();
            const auto t0 = std::chrono::steady_clock::now();
            const ModelOutputs out = models[i].model->forward(in);
            const auto t1 = std::chrono::steady_clock::now();
            if (!std::isfinite(out.image.data()[0])) throw NumericError("bench: non-finite output");
            if (it >= cfg.warmup) {
                results[i].samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            }
        }
    }
    for (auto& r : results) {
        double sum = 0.0;
        for (double v : r.samples_ms) sum += v;
        r.mean_ms = sum / r.samples_ms.size();
        double var = 0.0;
        for (double v : r.samples_ms) var += (v - r.mean_ms) * (v - r.mean_ms);
        r.stddev_ms = std::sqrt(var / r.samples_ms.size());
    }
    return results;
}

std::string format_bench_report(const std::vector<BenchResult>& results, const BenchConfig& cfg) {
    std::string out;
    char line[192];
    std::snprintf(line, sizeof line, "# bench %dx%d scale=%.2f warmup=%d iterations=%d\n", cfg.width, cfg.height,
                  cfg.scale, cfg.warmup, cfg.iterations);
    out += line;
    std::snprintf(line, sizeof line, "%-14s %10s %10s %10s\n", "config", "mean_ms", "std_ms", "overhead");
    out += line;
    for (const auto& r : results) {
        const double rel = results.empty() ? 0.0 : r.mean_ms / results.front().mean_ms - 1.0;
        std::snprintf(line, sizeof line, "%-14s %10.3f %10.3f %+9.2f%%\n", r.name.c_str(), r.mean_ms, r.stddev_ms,
                      100.0 * rel);
        out += line;
    }
    return out;
}

}  // namespace wsr
