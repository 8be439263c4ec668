#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "test_util.hpp"
#include "wavesr/data.hpp"
#include "wavesr/error.hpp"
#include "wavesr/scale.hpp"

using namespace wsr;
namespace fs = std::filesystem;

namespace {

SceneSpec small_spec(std::uint64_t seed = 7) {
    SceneSpec s;
    s.seed = seed;
    s.num_frames = 4;
    s.height = 48;
    s.width = 64;
    return s;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.numel(); ++i)
        if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) return false;
    return true;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("wavesr_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(Generator, Deterministic) {
    const auto a = generate_scene(small_spec()), b = generate_scene(small_spec());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
        EXPECT_TRUE(bitwise_equal(a[t].hdr, b[t].hdr));
        EXPECT_TRUE(bitwise_equal(a[t].gbuffer.normal, b[t].gbuffer.normal));
        EXPECT_TRUE(bitwise_equal(a[t].mv.mv, b[t].mv.mv));
    }
    EXPECT_FALSE(bitwise_equal(a[1].hdr, generate_scene(small_spec(8))[1].hdr));
}

TEST(Generator, StaticSceneHasZeroMotion) {
    SceneSpec s = small_spec();
    s.camera_speed = 0;
    s.object_speed = 0;
    for (const FrameRecord& f : generate_scene(s))
        for (float v : f.mv.mv.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Generator, ChannelContract) {
    for (const FrameRecord& f : generate_scene(small_spec(9))) {
        EXPECT_NO_THROW(f.gbuffer.validate());
        EXPECT_EQ(f.hdr.shape(), (Shape{3, 48, 64}));
        EXPECT_EQ(f.mv.mv.shape(), (Shape{2, 48, 64}));
        for (float v : f.hdr.data()) EXPECT_GE(v, 0.0f);
    }
    float peak = 0;
    for (const FrameRecord& f : generate_scene(small_spec(9)))
        for (float v : f.hdr.data()) peak = std::max(peak, v);
    EXPECT_GT(peak, 1.0f);  // HDR
}

TEST(Generator, DemodulationReproducesIrradiance) {
    SceneSpec s = small_spec(11);
    s.height = s.width = 128;
    s.num_frames = 3;
    int checked = 0;
    for (const FrameRecord& f : generate_scene(s)) {
        const BrdfFactor F = compute_brdf_factor(f.gbuffer);
        const Tensor l = demodulate(f.hdr, F);
        for (std::size_t i = 0; i < l.numel(); ++i) {
            if (F.f[i] <= kBrdfEpsilon) continue;
            ASSERT_NEAR(l[i], f.irradiance[i], 1e-5f * std::max(1.0f, f.irradiance[i]));
            ++checked;
        }
    }
    EXPECT_GT(checked, 0);
}

TEST(Generator, SlowPanReprojectsConsistently) {
    SceneSpec s = small_spec(12);
    s.height = s.width = 96;
    s.num_frames = 6;
    s.camera_speed = 0.5f;
    s.object_speed = 0.5f;
    const auto frames = generate_scene(s);
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const Tensor w = warp(frames[t - 1].hdr, frames[t].mv);
        const Tensor prev_id = warp(frames[t - 1].object_id, frames[t].mv);
        const int H = 96, W = 96;
        double acc = 0;
        int n = 0;
        for (int y = 2; y < H - 2; ++y)
            for (int x = 2; x < W - 2; ++x) {
                // Non-disoccluded: the warped id is unblended and equals the current id.
                const float id = frames[t].object_id.at(0, y, x);
                if (prev_id.at(0, y, x) != id) continue;
                for (int c = 0; c < 3; ++c) acc += std::fabs(w.at(c, y, x) - frames[t].hdr.at(c, y, x));
                n += 3;
            }
        ASSERT_GT(n, H * W);
        EXPECT_LT(acc / n, 0.05) << "frame " << t;
    }
}

TEST(Generator, RejectsOddResolution) {
    SceneSpec s = small_spec();
    s.height = 47;
    EXPECT_THROW(generate_scene(s), ConfigError);
    s.height = 48;
    s.num_frames = 1;
    EXPECT_THROW(generate_scene(s), ConfigError);
}

TEST(Downsample, IdentityBlocksAndSelection) {
    const Tensor img = wsr::testing::random_tensor({3, 16, 16}, 1);
    EXPECT_TRUE(bitwise_equal(downsample_nearest(img, 1.0f), img));
    Tensor blocks(Shape{1, 16, 16});
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) blocks.at(0, y, x) = static_cast<float>((y / 2) * 8 + x / 2);
    const Tensor d = downsample_nearest(blocks, 2.0f);
    ASSERT_EQ(d.shape(), (Shape{1, 8, 8}));
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) EXPECT_EQ(d.at(0, y, x), static_cast<float>(y * 8 + x));
    const Tensor r = downsample_nearest(wsr::testing::random_tensor({3, 40, 37}, 2), 3.5f);
    const Tensor src = wsr::testing::random_tensor({3, 40, 37}, 2);
    const std::set<float> src_pool(src.data().begin(), src.data().end());
    for (float v : r.data()) EXPECT_TRUE(src_pool.count(v));
    EXPECT_EQ(r.dim(1), 11);
    EXPECT_EQ(r.dim(2), 10);
}

TEST(Downsample, TooSmall) {
    EXPECT_THROW(downsample_nearest(Tensor::zeros({3, 15, 32}), 2.0f), ConfigError);
    EXPECT_THROW(downsample_nearest(Tensor::zeros({3, 32, 32}), 0.5f), ConfigError);
}

TEST(FrameFile, RoundTripAndSize) {
    TempDir dir("frame_rt");
    const auto frames = generate_scene(small_spec());
    const fs::path p = dir.path / "f.wsrf";
    write_frame(p, frames[1]);
    EXPECT_EQ(fs::file_size(p), frame_file_size(48, 64));
    std::size_t expect = 20;
    for (int ch : {3, 3, 3, 1, 1, 1, 2}) expect += 16 + 4 + 4 * ch * 48 * 64;
    EXPECT_EQ(fs::file_size(p), expect);
    const FrameRecord r = read_frame(p);
    EXPECT_TRUE(bitwise_equal(r.hdr, frames[1].hdr));
    EXPECT_TRUE(bitwise_equal(r.gbuffer.albedo, frames[1].gbuffer.albedo));
    EXPECT_TRUE(bitwise_equal(r.gbuffer.normal, frames[1].gbuffer.normal));
    EXPECT_TRUE(bitwise_equal(r.gbuffer.depth, frames[1].gbuffer.depth));
    EXPECT_TRUE(bitwise_equal(r.gbuffer.roughness, frames[1].gbuffer.roughness));
    EXPECT_TRUE(bitwise_equal(r.gbuffer.metallic, frames[1].gbuffer.metallic));
    EXPECT_TRUE(bitwise_equal(r.mv.mv, frames[1].mv.mv));
}

TEST(FrameFile, CorruptionReportsOffset) {
    TempDir dir("frame_bad");
    const fs::path p = dir.path / "f.wsrf";
    write_frame(p, generate_scene(small_spec())[0]);
    std::string bytes;
    {
        std::ifstream in(p, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto rewrite = [&](const std::string& b) { std::ofstream(p, std::ios::binary | std::ios::trunc) << b; };

    std::string bad = bytes;
    bad[0] = 'X';
    rewrite(bad);
    try {
        read_frame(p);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
    bad = bytes;
    bad[4] = 9;
    rewrite(bad);
    try {
        read_frame(p);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 4u);
    }
    rewrite(bytes.substr(0, bytes.size() - 10));
    try {
        read_frame(p);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), bytes.size() - 10);
    }
    rewrite(bytes.substr(0, 7));
    EXPECT_THROW(read_frame(p), FormatError);
}

TEST(Split, DeterministicAndHoldsOut) {
    const std::vector<std::string> ids = {"scene_000", "scene_001", "scene_002"};
    const SplitManifest a = make_split(ids, 42, 0.67, 0.0), b = make_split(ids, 42, 0.67, 0.0);
    EXPECT_EQ(a.scenes, b.scenes);
    EXPECT_EQ(a.scenes_in(Split::train).size(), 2u);
    EXPECT_EQ(a.scenes_in(Split::test).size(), 1u);
    TempDir dir("split");
    write_manifest(dir.path / "split.txt", a);
    const SplitManifest r = read_manifest(dir.path / "split.txt");
    EXPECT_EQ(r.scenes, a.scenes);
    EXPECT_EQ(r.seed, 42u);
}

TEST(Dataset, LayoutAndLoad) {
    TempDir dir("dataset");
    DatasetSpec spec;
    spec.num_scenes = 2;
    spec.scene = small_spec();
    spec.scene.num_frames = 3;
    const DatasetSummary sum = generate_dataset(dir.path, spec);
    EXPECT_EQ(sum.frames, 6);
    EXPECT_TRUE(fs::exists(dir.path / "scene_001" / "frame_00002.wsrf"));
    EXPECT_TRUE(fs::exists(dir.path / kManifestName));
    const auto frames = load_scene(dir.path, "scene_001");
    EXPECT_EQ(frames.size(), 3u);
    EXPECT_EQ(frames[2].frame_index, 2);
}

TEST(Sampler, ScalesShapesAndTargets) {
    SceneSpec s = small_spec(13);
    s.height = s.width = 64;
    const std::vector<std::vector<FrameRecord>> scenes = {generate_scene(s)};
    std::mt19937_64 rng(5);
    SamplerConfig cfg;
    cfg.patch = 48;
    for (int i = 0; i < 20; ++i) {
        const TrainingExample ex = sample_training_example(scenes, rng, cfg);
        EXPECT_GE(ex.scale, 2.0f);
        EXPECT_LE(ex.scale, 4.0f);
        const int lr = ex.l_lr.dim(1);
        EXPECT_EQ(lr % 2, 0);
        EXPECT_EQ(ex.target.dim(1), hr_extent(lr, ex.scale, false));
        EXPECT_EQ(ex.g_hr.height(), ex.target.dim(1));
        EXPECT_EQ(ex.masks.spatial.shape(), (Shape{1, ex.target.dim(1), ex.target.dim(2)}));
        const Tensor back = synthesize(ex.target_coeffs, cfg.wavelet);
        EXPECT_LT(wsr::testing::max_abs_diff(back, ex.target), 1e-5);
    }
    cfg.single_scale = true;
    cfg.wavelet = {Transform::dwt, Basis::haar, 1};
    for (int i = 0; i < 10; ++i) {
        const TrainingExample ex = sample_training_example(scenes, rng, cfg);
        EXPECT_EQ(ex.scale, 2.0f);
        EXPECT_EQ(ex.target.dim(1) % 2, 0);
        EXPECT_LT(wsr::testing::max_abs_diff(synthesize(ex.target_coeffs, cfg.wavelet), ex.target), 1e-5);
    }
    cfg.patch = 80;
    EXPECT_THROW(sample_training_example(scenes, rng, cfg), ConfigError);
}
