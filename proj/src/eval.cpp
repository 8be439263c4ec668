#include "wavesr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "wavesr/error.hpp"
#include "wavesr/ops.hpp"
#include "wavesr/scale.hpp"
#include "wavesr/train.hpp"

namespace wsr {

Tensor upsample_nearest(const Tensor& input, int out_h, int out_w) {
    if (input.ndim() != 3 || out_h < 1 || out_w < 1) throw ShapeError("upsample_nearest: bad shape");
    const int C = input.dim(0), h = input.dim(1), w = input.dim(2);
    Tensor out(Shape{C, out_h, out_w});
    auto src = input.data();
    auto dst = out.mutable_data();
    std::vector<int> xs(out_w);
    for (int x = 0; x < out_w; ++x) xs[x] = std::min(w - 1, static_cast<int>((x + 0.5) * w / out_w));
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < out_h; ++y) {
            const int sy = std::min(h - 1, static_cast<int>((y + 0.5) * h / out_h));
            const float* row = src.data() + (static_cast<std::size_t>(c) * h + sy) * w;
            float* o = dst.data() + (static_cast<std::size_t>(c) * out_h + y) * out_w;
            for (int x = 0; x < out_w; ++x) o[x] = row[xs[x]];
        }
    return out;
}

void write_ppm(const std::filesystem::path& path, const Tensor& rgb) {
    if (rgb.ndim() != 3 || rgb.dim(0) != 3) throw ShapeError("write_ppm: expected 3 x H x W");
    const int H = rgb.dim(1), W = rgb.dim(2);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "P6\n" << W << ' ' << H << "\n255\n";
    auto d = rgb.data();
    std::vector<unsigned char> row(static_cast<std::size_t>(W) * 3);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(d[c * plane + static_cast<std::size_t>(y) * W + x], 0.0f, 1.0f);
                row[static_cast<std::size_t>(x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
            }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

std::string metric_file_name(float scale, bool baseline) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_x%.2f.txt", baseline ? "baseline_nearest" : "metrics", scale);
    return buf;
}

ScaleReport evaluate_scale(const Model& model, const std::vector<std::vector<FrameRecord>>& scenes, float s,
                           const EvalOptions& opts) {
    const ModelConfig& mc = model.config();
    if (!(s >= mc.scale_min && s <= mc.scale_max)) {
        throw ConfigError("eval scale " + std::to_string(s) + " outside the model range");
    }
    NoGradGuard guard;
    SamplerConfig sc;
    sc.use_wavelet = false;  // targets only; coefficients are not needed

    ScaleReport report;
    report.scale = s;
    if (opts.dump_dir) std::filesystem::create_directories(*opts.dump_dir);
    for (const auto& frames : scenes) {
        if (frames.size() < 2) throw ConfigError("eval: scene needs at least 2 frames");
        const int H = frames[0].hdr.dim(1), W = frames[0].hdr.dim(2);
        const int lr_h = lr_extent(H, s), lr_w = lr_extent(W, s);
        if (lr_h < 8 || lr_w < 8) throw ConfigError("eval: scale " + std::to_string(s) + " leaves an LR side below 8");
        const int hr_h = hr_extent(lr_h, s, mc.decimated()), hr_w = hr_extent(lr_w, s, mc.decimated());
        report.lr_height = lr_h, report.lr_width = lr_w, report.hr_height = hr_h, report.hr_width = hr_w;

        // History seed: bilinear upsample of frame 0's LR irradiance.
        Tensor history;
        {
            const FrameRecord& f0 = frames[0];
            const Tensor irr = frame_irradiance(f0);
            Tensor window(Shape{3, hr_h, hr_w});
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < hr_h; ++y)
                    for (int x = 0; x < hr_w; ++x) window.at(c, y, x) = irr.at(c, y, x);
            history = upsample_bilinear(downsample_nearest_to(window, lr_h, lr_w), hr_h, hr_w);
        }

        int count = 0;
        for (int t = 1; t < static_cast<int>(frames.size()); ++t) {
            if (opts.max_frames > 0 && count >= opts.max_frames) break;
            ++count;
            const TrainingExample ex = build_example(frames, t, history, 0, 0, hr_h, hr_w, lr_h, lr_w, s, sc);
            const ModelOutputs out = model.forward({ex.l_lr, ex.g_hr, ex.l_prev_warped, ex.masks, s});
            history = out.image.detach();

            const BrdfFactor f_hr{ex.brdf_hr};
            const Tensor target_hdr = remodulate(ex.target, f_hr);
            const Tensor pred_hdr = remodulate(out.image, f_hr);
            // Baseline: the shaded LR frame, nearest-upsampled.
            const GBuffer g_lr = downsample_nearest_to(ex.g_hr, lr_h, lr_w);
            const Tensor lr_hdr = remodulate(ex.l_lr, compute_brdf_factor(g_lr));
            const Tensor nearest_hdr = upsample_nearest(lr_hdr, hr_h, hr_w);

            const std::string id = ex.scene_id + "/" + frame_file_name(t).substr(0, frame_file_name(t).find('.'));
            report.model.frames.push_back(evaluate_frame(id, pred_hdr, target_hdr));
            report.nearest.frames.push_back(evaluate_frame(id, nearest_hdr, target_hdr));

            if (opts.dump_dir) {
                char tag[32];
                std::snprintf(tag, sizeof tag, "_x%.2f", s);
                const std::string stem = ex.scene_id + "_" + std::to_string(t) + tag;
                write_ppm(*opts.dump_dir / (stem + "_pred.ppm"), tonemap_display(pred_hdr));
                write_ppm(*opts.dump_dir / (stem + "_gt.ppm"), tonemap_display(target_hdr));
                write_ppm(*opts.dump_dir / (stem + "_nearest.ppm"), tonemap_display(nearest_hdr));
            }
        }
    }
    return report;
}

namespace {

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "'");
}

std::string wavelet_name(const std::optional<WaveletSpec>& w) {
    return w ? to_string(*w) : std::string("none");
}

}  // namespace

std::vector<ScaleReport> run_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                  std::ostream* progress) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    if (wavelet_name(ck.config.wavelet) != wavelet_name(cfg.model.wavelet) || ck.config.variant != cfg.model.variant) {
        throw ConfigError("checkpoint wavelet " + wavelet_name(ck.config.wavelet) + " (" + to_string(ck.config.variant) +
                          ") does not match config wavelet " + wavelet_name(cfg.model.wavelet) + " (" +
                          to_string(cfg.model.variant) + ")");
    }
    Model model(ck.config);
    load_parameters(model, ck);
    const auto scenes = load_split(cfg.data_dir, parse_split(cfg.eval.split));

    std::filesystem::create_directories(cfg.out);
    EvalOptions opts;
    opts.max_frames = cfg.eval.max_frames;
    if (cfg.eval.dump_images) opts.dump_dir = cfg.out / "images";

    std::vector<ScaleReport> reports;
    for (float s : cfg.eval.scales) {
        ScaleReport r = evaluate_scale(model, scenes, s, opts);
        for (bool baseline : {false, true}) {
            std::ofstream os(cfg.out / metric_file_name(s, baseline));
            if (!os) throw DataError("cannot write metric report in '" + cfg.out.string() + "'");
            write_metric_report(os, baseline ? r.nearest : r.model);
        }
        if (progress) {
            char line[160];
            std::snprintf(line, sizeof line, "scale %.2f  model psnr %.4f ssim %.4f  nearest psnr %.4f ssim %.4f\n", s,
                          r.model.mean_psnr(), r.model.mean_ssim(), r.nearest.mean_psnr(), r.nearest.mean_ssim());
            *progress << line << std::flush;
        }
        reports.push_back(std::move(r));
    }
    return reports;
}

AblationRow run_ablation_row(const RunConfig& base, const std::string& name,
                             const std::vector<std::vector<FrameRecord>>& train,
                             const std::vector<std::vector<FrameRecord>>& test) {
    RunConfig cfg = apply_preset(base, name);
    cfg.train.steps = base.ablate.steps;
    cfg.validate();
    Trainer trainer(cfg, train);
    std::vector<double> totals;
    while (trainer.steps_done() < cfg.train.steps) totals.push_back(trainer.step().loss.total);

    AblationRow row;
    row.name = name;
    const std::size_t tail = std::min<std::size_t>(20, totals.size());
    for (std::size_t i = totals.size() - tail; i < totals.size(); ++i) row.final_loss += totals[i] / tail;
    EvalOptions opts;
    opts.max_frames = base.eval.max_frames;
    const ScaleReport r = evaluate_scale(trainer.model(), test, base.ablate.scale, opts);
    row.psnr = r.model.mean_psnr();
    row.ssim = r.model.mean_ssim();
    return row;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::ostream* progress) {
    cfg.validate();
    if (cfg.ablate.configs.empty()) throw ConfigError("ablate.configs is empty");
    for (const auto& name : cfg.ablate.configs) apply_preset(cfg, name).validate();
    const auto train = load_split(cfg.data_dir, Split::train);
    const auto test = load_split(cfg.data_dir, Split::test);

    std::vector<AblationRow> rows;
    for (const auto& name : cfg.ablate.configs) {
        try {
            rows.push_back(run_ablation_row(cfg, name, train, test));
        } catch (const std::exception& e) {
            throw ConfigError("ablation config '" + name + "' failed: " + e.what());
        }
        if (progress) {
            char line[160];
            std::snprintf(line, sizeof line, "%-14s psnr %.4f ssim %.4f loss %.5f\n", name.c_str(), rows.back().psnr,
                          rows.back().ssim, rows.back().final_loss);
            *progress << line << std::flush;
        }
    }
    return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows, std::uint64_t seed, int steps, float scale) {
    std::string out;
    char line[192];
    std::snprintf(line, sizeof line, "# ablation seed=%llu steps=%d scale=%.2f\n", static_cast<unsigned long long>(seed),
                  steps, scale);
    out += line;
    std::snprintf(line, sizeof line, "%-14s %10s %8s %10s\n", "config", "psnr", "ssim", "loss");
    out += line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-14s %10.4f %8.4f %10.5f\n", r.name.c_str(), r.psnr, r.ssim, r.final_loss);
        out += line;
    }
    return out;
}

}  // namespace wsr
