// wavesr: generate / train / eval / ablate / bench.
// Exit codes: 0 ok, 1 internal, 2 config, 3 data, 4 numeric.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wavesr/bench.hpp"
#include "wavesr/config.hpp"
#include "wavesr/data.hpp"
#include "wavesr/error.hpp"
#include "wavesr/eval.hpp"
#include "wavesr/train.hpp"

namespace fs = std::filesystem;
using namespace wsr;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "INI run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Base seed (overrides [run] seed)");
    cmd->add_option("--out", f.out, "Output directory (overrides [run] out)");
}

RunConfig resolve(const CommonFlags& f) {
    RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (f.out) cfg.out = *f.out;
    cfg.require_seed();
    return cfg;
}

int cmd_generate(RunConfig cfg, const CommonFlags& f, std::optional<int> frames, std::optional<int> scenes) {
    if (f.out) cfg.data_dir = *f.out;
    if (frames) cfg.data.scene.num_frames = *frames;
    if (scenes) cfg.data.num_scenes = *scenes;
    cfg.data.seed = cfg.require_seed();
    const DatasetSummary s = generate_dataset(cfg.data_dir, cfg.data);
    std::cout << "generated " << s.frames << " frames across " << s.scenes << " scenes in " << cfg.data_dir.string()
              << '\n';
    return 0;
}

int cmd_train(RunConfig cfg, std::optional<std::string> resume, std::optional<int> steps) {
    if (steps) cfg.train.steps = *steps;
    const TrainOutcome r =
        run_training(cfg, resume ? std::optional<fs::path>(*resume) : std::nullopt, &std::cout);
    std::cout << "checkpoint " << r.checkpoint.string() << '\n';
    return 0;
}

int cmd_eval(RunConfig cfg, std::optional<std::string> checkpoint, std::optional<float> scale,
             std::optional<std::string> scales, bool dump) {
    if (scale) cfg.eval.scales = {*scale};
    if (scales) cfg.eval.scales = parse_scales(*scales);
    if (dump) cfg.eval.dump_images = true;
    cfg.validate();
    const fs::path ck = checkpoint ? fs::path(*checkpoint) : cfg.out / kCheckpointFile;
    run_eval(cfg, ck, &std::cout);
    return 0;
}

int cmd_ablate(RunConfig cfg, std::optional<int> steps) {
    if (steps) cfg.ablate.steps = *steps;
    const auto rows = run_ablation(cfg, &std::cout);
    const std::string table = format_ablation_table(rows, cfg.require_seed(), cfg.ablate.steps, cfg.ablate.scale);
    fs::create_directories(cfg.out);
    std::ofstream(cfg.out / "ablation.txt") << table;
    std::cout << table;
    return 0;
}

int cmd_bench(RunConfig cfg, const std::vector<std::string>& checkpoints, std::optional<float> scale,
              std::optional<int> iterations, std::optional<int> warmup) {
    if (scale) cfg.bench.scale = *scale;
    if (iterations) cfg.bench.iterations = *iterations;
    if (warmup) cfg.bench.warmup = *warmup;
    if (cfg.bench.iterations < 1) throw ConfigError("need at least one timed iteration");

    std::vector<Model> models;
    std::vector<std::string> names;
    models.reserve(std::max(checkpoints.size(), cfg.bench.configs.size()));
    if (!checkpoints.empty()) {
        for (const auto& path : checkpoints) {
            const Checkpoint ck = load_checkpoint(path);
            models.emplace_back(ck.config);
            load_parameters(models.back(), ck);
            names.push_back(fs::path(path).stem().string());
        }
    } else {
        for (const auto& name : cfg.bench.configs) {
            RunConfig c = apply_preset(cfg, name);
            c.model.seed = cfg.require_seed();
            c.model.validate();
            models.emplace_back(c.model);
            names.push_back(name);
        }
    }
    std::vector<NamedModel> named;
    for (std::size_t i = 0; i < models.size(); ++i) named.push_back({names[i], &models[i]});
    const auto results = run_bench(named, cfg.bench, cfg.require_seed());
    std::cout << format_bench_report(results, cfg.bench);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"Wavelet-domain neural super-resolution for rendered frames"};
    app.require_subcommand(1);

    CommonFlags gen_f, train_f, eval_f, abl_f, bench_f;
    std::optional<int> frames, scenes, train_steps, abl_steps, iterations, warmup;
    std::optional<std::string> resume, eval_ck, scales;
    std::optional<float> eval_scale, bench_scale;
    std::vector<std::string> bench_cks;
    bool dump = false;

    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset and split manifest");
    add_common(gen, gen_f);
    gen->add_option("--frames", frames, "Frames per scene (at least 2)");
    gen->add_option("--scenes", scenes, "Number of scenes");

    auto* train = app.add_subcommand("train", "Train and write a checkpoint plus loss log");
    add_common(train, train_f);
    train->add_option("--checkpoint", resume, "Resume from this checkpoint");
    train->add_option("--steps", train_steps, "Total optimiser steps");

    auto* eval = app.add_subcommand("eval", "Full-frame metrics per scale");
    add_common(eval, eval_f);
    eval->add_option("--checkpoint", eval_ck, "Checkpoint (default <out>/checkpoint.wdss)");
    auto* scale_opt = eval->add_option("--scale", eval_scale, "Single upscaling factor in [2, 4]");
    eval->add_option("--scales", scales, "Comma list or 'all' (2,3,4)")->excludes(scale_opt);
    eval->add_flag("--dump", dump, "Write tone-mapped PPM images");

    auto* abl = app.add_subcommand("ablate", "Train and evaluate each ablation config");
    add_common(abl, abl_f);
    abl->add_option("--steps", abl_steps, "Step budget per config");

    auto* bench = app.add_subcommand("bench", "Single-frame inference timing");
    add_common(bench, bench_f);
    bench->add_option("--checkpoint", bench_cks, "Checkpoint(s) to time; default: [bench] configs");
    bench->add_option("--scale", bench_scale, "Upscaling factor");
    bench->add_option("--iterations", iterations, "Timed iterations");
    bench->add_option("--warmup", warmup, "Warmup iterations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) return cmd_generate(resolve(gen_f), gen_f, frames, scenes);
        if (*train) return cmd_train(resolve(train_f), resume, train_steps);
        if (*eval) return cmd_eval(resolve(eval_f), eval_ck, eval_scale, scales, dump);
        if (*abl) return cmd_ablate(resolve(abl_f), abl_steps);
        if (*bench) return cmd_bench(resolve(bench_f), bench_cks, bench_scale, iterations, warmup);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ParamError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
