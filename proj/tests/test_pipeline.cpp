#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "wavesr/bench.hpp"
#include "wavesr/config.hpp"
#include "wavesr/error.hpp"
#include "wavesr/eval.hpp"
#include "wavesr/train.hpp"

using namespace wsr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("wavesr_pipe_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Two 40x40 scenes, one train and one test, and a model small enough that a
// training step takes milliseconds.
RunConfig tiny_config(const fs::path& root) {
    RunConfig c;
    c.seed = 3;
    c.data_dir = root / "data";
    c.out = root / "run";
    c.data.num_scenes = 2;
    c.data.seed = 3;
    c.data.train_ratio = 0.5;
    c.data.scene.num_frames = 3;
    c.data.scene.height = 40;
    c.data.scene.width = 40;
    c.model.base_channels = 8;
    c.model.inr_hidden = 16;
    c.model.freq_channels = 4;
    c.model.lr_blocks = 1;
    c.model.rir_blocks = 1;
    c.model.lwgc_layers = 1;
    c.train.patch = 32;
    c.train.batch = 2;
    c.train.steps = 3;
    c.train.checkpoint_every = 0;
    c.eval.max_frames = 1;
    return c;
}

RunConfig tiny_with_data(const fs::path& root) {
    RunConfig c = tiny_config(root);
    generate_dataset(c.data_dir, c.data);
    return c;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST(Config, ParsesSections) {
    const RunConfig c = parse_run_config(
        "# comment\n[run]\nseed = 5\nout = runs/x\n[model]\nwavelet = dwt-haar ; trailing\n"
        "[train]\nsteps = 7\ncosine = true\n[loss]\nssim = 0.25\n[eval]\nscales = all\n");
    EXPECT_EQ(c.require_seed(), 5u);
    EXPECT_EQ(c.out, fs::path("runs/x"));
    ASSERT_TRUE(c.model.wavelet.has_value());
    EXPECT_EQ(to_string(*c.model.wavelet), "dwt-haar");
    EXPECT_EQ(c.train.steps, 7);
    EXPECT_TRUE(c.train.cosine);
    EXPECT_FLOAT_EQ(c.loss.ssim, 0.25f);
    EXPECT_EQ(c.eval.scales, (std::vector<float>{2.0f, 3.0f, 4.0f}));
}

TEST(Config, UnknownKeyIsNamed) {
    try {
        parse_run_config("[train]\nstepz = 3\n", "my.ini");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("train.stepz"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("my.ini:2"), std::string::npos) << e.what();
    }
}

TEST(Config, RejectsMalformedInput) {
    EXPECT_THROW(parse_run_config("[nope]\n"), ConfigError);
    EXPECT_THROW(parse_run_config("seed = 1\n"), ConfigError);
    EXPECT_THROW(parse_run_config("[train]\nsteps = 3x\n"), ConfigError);
    EXPECT_THROW(parse_run_config("[train]\nsteps\n"), ConfigError);
    EXPECT_THROW(parse_run_config("[train]\ncosine = maybe\n"), ConfigError);
    EXPECT_THROW(parse_run_config("[model]\nvariant = giant\n"), ConfigError);
}

TEST(Config, SeedIsMandatory) {
    RunConfig c;
    EXPECT_THROW(c.require_seed(), ConfigError);
    EXPECT_THROW(c.validate(), ConfigError);
    c.seed = 1;
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, DegenerateObjective) {
    RunConfig c;
    c.seed = 1;
    c.loss = LossWeights{0, 0, 0, 0, 0, 0};
    try {
        c.validate();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("degenerate objective"), std::string::npos);
    }
}

TEST(Config, ZeroBenchIterations) {
    RunConfig c;
    c.seed = 1;
    c.bench.iterations = 0;
    try {
        c.validate();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_STREQ(e.what(), "need at least one timed iteration");
    }
}

TEST(Config, PresetsCoverAblationRows) {
    RunConfig base;
    base.seed = 1;
    for (const auto& name : preset_names()) EXPECT_NO_THROW(apply_preset(base, name).validate()) << name;
    EXPECT_FALSE(apply_preset(base, "no_wavelet").model.wavelet.has_value());
    EXPECT_EQ(to_string(*apply_preset(base, "swt_db4").model.wavelet), "swt-db4");
    EXPECT_EQ(apply_preset(base, "multi_inr").model.variant, Variant::multi_inr);
    EXPECT_TRUE(apply_preset(base, "multi_inr").model.decimated());
    EXPECT_EQ(apply_preset(base, "fusion_ll").model.variant, Variant::fusion_ll_split);
    EXPECT_TRUE(apply_preset(base, "single_scale").train.single_scale);
    EXPECT_FALSE(apply_preset(base, "dwt_haar").train.single_scale);
    EXPECT_THROW(apply_preset(base, "swt_db8"), ConfigError);
}

TEST(Adam, FirstStepMovesEachWeightByLr) {
    Tensor x(Shape{3}, std::vector<float>{1.0f, -2.0f, 3.0f});
    x.set_requires_grad(true);
    Adam opt({{"x", x}}, 0.9f, 0.999f, 1e-8f);
    backward(sum(mul(x, Tensor(Shape{3}, std::vector<float>{4.0f, -0.5f, 1e-3f}))));
    opt.step(0.01f);
    // Bias-corrected first step is lr * g / |g|.
    EXPECT_NEAR(x[0], 1.0f - 0.01f, 1e-6);
    EXPECT_NEAR(x[1], -2.0f + 0.01f, 1e-6);
    EXPECT_NEAR(x[2], 3.0f - 0.01f, 1e-5);
    EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, MinimisesQuadratic) {
    Tensor x(Shape{4}, 0.0f);
    x.set_requires_grad(true);
    const Tensor c(Shape{4}, std::vector<float>{1.0f, -1.0f, 0.5f, 2.0f});
    Adam opt({{"x", x}}, 0.9f, 0.999f, 1e-8f);
    for (int i = 0; i < 600; ++i) {
        const Tensor d = sub(x, c);
        backward(sum(mul(d, d)));
        opt.step(0.05f);
        opt.zero_grad();
    }
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(x[i], c[i], 1e-2);
}

TEST(Adam, StateRoundTrip) {
    auto make = [] {
        Tensor x(Shape{2}, std::vector<float>{0.3f, -0.7f});
        x.set_requires_grad(true);
        return x;
    };
    auto grad_step = [](Tensor& x, Adam& opt) {
        opt.zero_grad();
        backward(sum(mul(x, x)));
        opt.step(0.1f);
    };
    Tensor a = make();
    Adam oa({{"x", a}}, 0.9f, 0.999f, 1e-8f);
    grad_step(a, oa);
    grad_step(a, oa);
    Checkpoint ck;
    oa.save_state(ck);

    Tensor b = a.detach();
    b.set_requires_grad(true);
    Adam ob({{"x", b}}, 0.9f, 0.999f, 1e-8f);
    ob.load_state(ck);
    EXPECT_EQ(ob.steps(), 2);
    grad_step(a, oa);
    grad_step(b, ob);
    EXPECT_EQ(a[0], b[0]);
    EXPECT_EQ(a[1], b[1]);

    Checkpoint empty;
    EXPECT_THROW(ob.load_state(empty), FormatError);
}

TEST(Trainer, StepLogFormat) {
    StepLog s;
    s.step = 12;
    s.loss = LossReport{0.1, 0.2, 0.3, 0.4, 0.5, 1.5};
    EXPECT_EQ(format_step_log(s), "12 1.500000 0.100000 0.200000 0.300000 0.400000 0.500000");
}

TEST(Trainer, DeterministicAndResumable) {
    TempDir dir("resume");
    const RunConfig cfg = tiny_with_data(dir.path);
    const auto scenes = load_split(cfg.data_dir, Split::train);

    Trainer full(cfg, scenes);
    std::vector<StepLog> logs;
    for (int i = 0; i < 3; ++i) logs.push_back(full.step());

    Trainer twin(cfg, scenes);
    EXPECT_TRUE(same_bits(twin.step().loss.total, logs[0].loss.total));
    EXPECT_TRUE(same_bits(twin.step().loss.total, logs[1].loss.total));

    Trainer resumed(cfg, scenes);
    resumed.resume(twin.checkpoint());
    EXPECT_EQ(resumed.steps_done(), 2);
    const StepLog s3 = resumed.step();
    EXPECT_EQ(s3.step, 3);
    EXPECT_TRUE(same_bits(s3.loss.total, logs[2].loss.total)) << s3.loss.total << " vs " << logs[2].loss.total;
    const auto& pa = full.model().parameters();
    const auto& pb = resumed.model().parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_EQ(wsr::testing::max_abs_diff(pa[i].second, pb[i].second), 0.0) << pa[i].first;
    }
}

TEST(Trainer, ResumeRejectsOtherSeed) {
    TempDir dir("seed");
    RunConfig cfg = tiny_with_data(dir.path);
    const auto scenes = load_split(cfg.data_dir, Split::train);
    Trainer a(cfg, scenes);
    a.step();
    cfg.seed = 4;
    cfg.model.seed = 3;  // model init seed follows the run seed; compare only the training seed
    Trainer b(cfg, scenes);
    EXPECT_THROW(b.resume(a.checkpoint()), ConfigError);
}

TEST(Trainer, NonFiniteLossNamesBatch) {
    TempDir dir("nan");
    const RunConfig cfg = tiny_with_data(dir.path);
    auto scenes = load_split(cfg.data_dir, Split::train);
    for (auto& f : scenes[0]) {
        for (float& v : f.hdr.mutable_data()) v = std::nanf("");
    }
    Trainer t(cfg, scenes);
    try {
        t.step();
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("step 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("batch index 0"), std::string::npos) << msg;
        EXPECT_NE(msg.find(scenes[0][0].scene_id), std::string::npos) << msg;
    }
}

TEST(Trainer, RunTrainingWritesLogAndResumes) {
    TempDir dir("run");
    RunConfig cfg = tiny_with_data(dir.path);
    const TrainOutcome full = run_training(cfg, std::nullopt);
    ASSERT_EQ(full.log.size(), 3u);
    const auto lines = read_lines(cfg.out / kLossLogFile);
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(lines[0], "# step total l_w l_i l_s l_m l_t");
    for (int i = 1; i <= 3; ++i) {
        std::istringstream in(lines[i]);
        int step = 0;
        double v = 0.0;
        in >> step;
        EXPECT_EQ(step, i);
        int fields = 0;
        while (in >> v) ++fields;
        EXPECT_EQ(fields, 6);
    }

    RunConfig part = cfg;
    part.out = dir.path / "part";
    part.train.steps = 2;
    const TrainOutcome first = run_training(part, std::nullopt);
    part.train.steps = 3;
    const TrainOutcome rest = run_training(part, first.checkpoint);
    ASSERT_EQ(rest.log.size(), 1u);
    EXPECT_TRUE(same_bits(rest.log[0].loss.total, full.log[2].loss.total));
    EXPECT_EQ(read_lines(part.out / kLossLogFile), lines);
}

TEST(Eval, NearestUpsampleInvertsBlockDownsample) {
    const Tensor x = wsr::testing::random_tensor({3, 8, 10}, 5);
    const Tensor up = upsample_nearest(x, 24, 30);
    EXPECT_EQ(wsr::testing::max_abs_diff(downsample_nearest(up, 3.0f), x), 0.0);
    EXPECT_EQ(up.at(1, 5, 7), x.at(1, 1, 2));
}

TEST(Eval, GroundTruthAgainstItself) {
    const Tensor gt = wsr::testing::random_tensor({3, 24, 24}, 8, 0.0f, 4.0f);
    const FrameMetric m = evaluate_frame("gt", gt, gt);
    EXPECT_DOUBLE_EQ(m.psnr, kPsnrCapDb);
    EXPECT_NEAR(m.ssim, 1.0, 1e-12);
}

TEST(Eval, ScaleReportShapes) {
    TempDir dir("eval");
    RunConfig cfg = tiny_with_data(dir.path);
    cfg.model.seed = 3;
    const Model model(cfg.model);
    const auto scenes = load_split(cfg.data_dir, Split::test);
    EvalOptions opts;
    opts.dump_dir = dir.path / "img";
    const ScaleReport r = evaluate_scale(model, scenes, 3.0f, opts);
    EXPECT_EQ(r.lr_height, 12);
    EXPECT_EQ(r.hr_height, 36);
    EXPECT_EQ(r.model.frames.size(), 2u);
    EXPECT_EQ(r.nearest.frames.size(), 2u);
    for (const auto& f : r.model.frames) {
        EXPECT_TRUE(std::isfinite(f.psnr));
        EXPECT_GT(f.ssim, 0.0);
        EXPECT_LE(f.ssim, 1.0 + 1e-9);
    }
    EXPECT_TRUE(fs::exists(dir.path / "img" / (scenes[0][0].scene_id + "_1_x3.00_pred.ppm")));
    EXPECT_THROW(evaluate_scale(model, scenes, 4.5f), ConfigError);
}

TEST(Eval, RunEvalWritesReportsAndChecksWavelet) {
    TempDir dir("runeval");
    RunConfig cfg = tiny_with_data(dir.path);
    cfg.train.steps = 1;
    const TrainOutcome t = run_training(cfg, std::nullopt);
    cfg.eval.scales = parse_scales("all");
    const auto reports = run_eval(cfg, t.checkpoint);
    ASSERT_EQ(reports.size(), 3u);
    for (float s : {2.0f, 3.0f, 4.0f}) {
        const auto lines = read_lines(cfg.out / metric_file_name(s, false));
        ASSERT_EQ(lines.size(), 2u);
        EXPECT_EQ(lines.back().rfind("mean ", 0), 0u);
        EXPECT_TRUE(fs::exists(cfg.out / metric_file_name(s, true)));
    }
    RunConfig other = apply_preset(cfg, "dwt_haar");
    EXPECT_THROW(run_eval(other, t.checkpoint), ConfigError);
}

TEST(Ablation, TableFollowsRequestOrder) {
    TempDir dir("ablate");
    RunConfig cfg = tiny_with_data(dir.path);
    cfg.ablate.configs = {"swt_haar", "no_wavelet", "multi_inr"};
    cfg.ablate.steps = 1;
    const auto rows = run_ablation(cfg);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].name, "swt_haar");
    EXPECT_EQ(rows[1].name, "no_wavelet");
    EXPECT_EQ(rows[2].name, "multi_inr");
    const std::string table = format_ablation_table(rows, 3, 1, 2.0f);
    std::istringstream in(table);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "# ablation seed=3 steps=1 scale=2.00");
    int rows_seen = 0;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string name;
        double psnr = 0, ssim = 0, loss = 0;
        ASSERT_TRUE(row >> name >> psnr >> ssim >> loss) << line;
        EXPECT_EQ(name, rows[rows_seen].name);
        ++rows_seen;
    }
    EXPECT_EQ(rows_seen, 3);

    const auto train = load_split(cfg.data_dir, Split::train);
    const auto test = load_split(cfg.data_dir, Split::test);
    const AblationRow again = run_ablation_row(cfg, "no_wavelet", train, test);
    EXPECT_TRUE(same_bits(again.psnr, rows[1].psnr));
    EXPECT_TRUE(same_bits(again.ssim, rows[1].ssim));
}

TEST(Ablation, UnknownConfigIsNamed) {
    TempDir dir("ablate_bad");
    RunConfig cfg = tiny_with_data(dir.path);
    cfg.ablate.configs = {"swt_haar", "swt_coif2"};
    try {
        run_ablation(cfg);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("swt_coif2"), std::string::npos) << e.what();
    }
}

TEST(Bench, ReportsNonNegativeSpread) {
    RunConfig cfg = tiny_config(fs::temp_directory_path());
    cfg.model.seed = 1;
    const Model a(cfg.model);
    const Model b(apply_preset(cfg, "no_wavelet").model);
    BenchConfig bc;
    bc.height = bc.width = 32;
    bc.warmup = 1;
    bc.iterations = 3;
    const auto r = run_bench({{"swt", &a}, {"none", &b}}, bc, 1);
    ASSERT_EQ(r.size(), 2u);
    for (const auto& x : r) {
        EXPECT_EQ(x.samples_ms.size(), 3u);
        EXPECT_GE(x.stddev_ms, 0.0);
        EXPECT_GT(x.mean_ms, 0.0);
    }
    const std::string report = format_bench_report(r, bc);
    EXPECT_NE(report.find("overhead"), std::string::npos);
    EXPECT_NE(report.find("+0.00%"), std::string::npos);

    bc.iterations = 0;
    try {
        run_bench({{"swt", &a}}, bc, 1);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_STREQ(e.what(), "need at least one timed iteration");
    }
}
