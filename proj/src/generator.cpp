#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "wavesr/data.hpp"
#include "wavesr/error.hpp"

namespace wsr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Wave {
    double fy = 0, fx = 0, phase = 0;
    double amp[3] = {0, 0, 0};
    double eval(double y, double x) const { return std::sin(kTwoPi * (fy * y + fx * x) + phase); }
    // d/dy and d/dx of eval().
    double dy(double y, double x) const { return kTwoPi * fy * std::cos(kTwoPi * (fy * y + fx * x) + phase); }
    double dx(double y, double x) const { return kTwoPi * fx * std::cos(kTwoPi * (fy * y + fx * x) + phase); }
};

enum class Shape2 { sphere, quad };

struct Object {
    Shape2 kind = Shape2::sphere;
    double py = 0, px = 0;  // world position at t = 0
    double vy = 0, vx = 0;  // world velocity, pixels per frame
    double radius = 10;     // sphere radius or quad half extent (y)
    double half_x = 10;     // quad half extent (x)
    double depth = 10;
    double normal[3] = {0, 0, 1};  // quads only
    double albedo[3] = {0.5, 0.5, 0.5};
    double metallic = 0, roughness = 0.5;
    Wave texture;
};

struct Scene {
    double cam_y = 0, cam_x = 0, cam_vy = 0, cam_vx = 0;
    double base[3] = {0.5, 0.5, 0.5};
    std::vector<Wave> tex, bump;
    Wave metal_wave, rough_wave;
    std::vector<Object> objects;
    double light_theta = 0, light_elev = 0.7, ambient = 0.15;
    double tint[3] = {1, 1, 1};
};

struct Surface {
    double albedo[3];
    double normal[3];
    double depth, roughness, metallic;
    double mvy, mvx;
    int id;
};

Wave random_wave(std::mt19937_64& rng, double fmin, double fmax, double amp_lo, double amp_hi) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Wave w;
    const double f = fmin + (fmax - fmin) * u(rng);
    const double a = kTwoPi * u(rng);
    w.fy = f * std::sin(a);
    w.fx = f * std::cos(a);
    w.phase = kTwoPi * u(rng);
    for (double& v : w.amp) v = amp_lo + (amp_hi - amp_lo) * u(rng);
    return w;
}

Scene build_scene(const SceneSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Scene s;
    s.cam_y = 1000.0 * u(rng);
    s.cam_x = 1000.0 * u(rng);
    const double cam_dir = kTwoPi * u(rng);
    s.cam_vy = spec.camera_speed * std::sin(cam_dir);
    s.cam_vx = spec.camera_speed * std::cos(cam_dir);
    for (double& c : s.base) c = 0.35 + 0.3 * u(rng);
    for (int i = 0; i < 4; ++i) s.tex.push_back(random_wave(rng, spec.tex_freq_min, spec.tex_freq_max, 0.03, 0.1));
    for (int i = 0; i < 4; ++i) {
        Wave b = random_wave(rng, spec.tex_freq_min, spec.tex_freq_max, 0.0, 0.0);
        // Height amplitude chosen so the peak slope is about 0.25.
        const double f = std::hypot(b.fy, b.fx);
        b.amp[0] = 0.25 / (kTwoPi * f * 4.0);
        s.bump.push_back(b);
    }
    s.metal_wave = random_wave(rng, 0.01, 0.03, 0, 0);
    s.rough_wave = random_wave(rng, 0.01, 0.05, 0, 0);

    for (int i = 0; i < spec.num_objects; ++i) {
        Object o;
        o.kind = (i % 2 == 0) ? Shape2::sphere : Shape2::quad;
        o.py = s.cam_y + spec.height * (0.1 + 0.8 * u(rng));
        o.px = s.cam_x + spec.width * (0.1 + 0.8 * u(rng));
        const double dir = kTwoPi * u(rng), speed = spec.object_speed * u(rng);
        o.vy = speed * std::sin(dir);
        o.vx = speed * std::cos(dir);
        const double extent = std::min(spec.height, spec.width);
        o.radius = extent * (0.06 + 0.1 * u(rng));
        o.half_x = extent * (0.06 + 0.1 * u(rng));
        o.depth = 6.0 + 9.0 * u(rng);
        const double ny = 0.8 * (u(rng) - 0.5), nx = 0.8 * (u(rng) - 0.5);
        const double len = std::sqrt(ny * ny + nx * nx + 1.0);
        o.normal[0] = nx / len;
        o.normal[1] = ny / len;
        o.normal[2] = 1.0 / len;
        for (double& c : o.albedo) c = 0.2 + 0.7 * u(rng);
        o.metallic = u(rng) < 0.3 ? 1.0 : 0.0;
        o.roughness = 0.1 + 0.8 * u(rng);
        o.texture = random_wave(rng, spec.tex_freq_min, spec.tex_freq_max, 0.05, 0.1);
        s.objects.push_back(o);
    }
    s.light_theta = kTwoPi * u(rng);
    s.light_elev = 0.5 + 0.4 * u(rng);
    s.ambient = 0.1 + 0.1 * u(rng);
    for (double& c : s.tint) c = 0.85 + 0.3 * u(rng);
    return s;
}

Surface background(const Scene& s, double wy, double wx) {
    Surface f{};
    for (int c = 0; c < 3; ++c) {
        double a = s.base[c];
        for (const Wave& w : s.tex) a += w.amp[c] * w.eval(wy, wx);
        f.albedo[c] = std::clamp(a, 0.0, 1.0);
    }
    double hy = 0, hx = 0;
    for (const Wave& b : s.bump) {
        hy += b.amp[0] * b.dy(wy, wx);
        hx += b.amp[0] * b.dx(wy, wx);
    }
    // Normal (x, y, z) of the height field z = h(x, y).
    const double len = std::sqrt(hx * hx + hy * hy + 1.0);
    f.normal[0] = -hx / len;
    f.normal[1] = -hy / len;
    f.normal[2] = 1.0 / len;
    f.depth = 20.0 + 0.01 * wy;
    f.metallic = s.metal_wave.eval(wy, wx) > 0.7 ? 1.0 : 0.0;
    f.roughness = 0.5 + 0.3 * s.rough_wave.eval(wy, wx);
    f.mvy = s.cam_vy;
    f.mvx = s.cam_vx;
    f.id = 0;
    return f;
}

// Returns false when the object does not cover the point.
bool hit(const Scene& s, const Object& o, int index, double wy, double wx, int t, Surface& f) {
    const double ly = wy - (o.py + o.vy * t), lx = wx - (o.px + o.vx * t);
    if (o.kind == Shape2::sphere) {
        const double r2 = o.radius * o.radius, d2 = ly * ly + lx * lx;
        if (d2 >= r2) return false;
        const double h = std::sqrt(r2 - d2);
        f.depth = o.depth - h;
        f.normal[0] = lx / o.radius;
        f.normal[1] = ly / o.radius;
        f.normal[2] = h / o.radius;
        const double len = std::sqrt(f.normal[0] * f.normal[0] + f.normal[1] * f.normal[1] + f.normal[2] * f.normal[2]);
        for (double& v : f.normal) v /= len;
    } else {
        if (std::fabs(ly) >= o.radius || std::fabs(lx) >= o.half_x) return false;
        f.depth = o.depth;
        std::copy(std::begin(o.normal), std::end(o.normal), f.normal);
    }
    const double tex = o.texture.eval(ly, lx);
    for (int c = 0; c < 3; ++c) f.albedo[c] = std::clamp(o.albedo[c] + o.texture.amp[c] * tex, 0.0, 1.0);
    f.metallic = o.metallic;
    f.roughness = o.roughness;
    f.mvy = s.cam_vy - o.vy;
    f.mvx = s.cam_vx - o.vx;
    f.id = index + 1;
    return true;
}

}  // namespace

void SceneSpec::validate() const {
    if (height <= 0 || width <= 0 || height % 2 != 0 || width % 2 != 0) {
        throw ConfigError("scene resolution must be positive and even, got " + std::to_string(height) + "x" +
                          std::to_string(width));
    }
    if (num_frames < 2) throw ConfigError("scene needs at least 2 frames, got " + std::to_string(num_frames));
    if (num_objects < 0) throw ConfigError("scene object count must be non-negative");
    if (!(tex_freq_min > 0.0f && tex_freq_max >= tex_freq_min && tex_freq_max <= 0.5f)) {
        throw ConfigError("texture frequency band must satisfy 0 < min <= max <= 0.5");
    }
    if (camera_speed < 0.0f || object_speed < 0.0f || light_speed < 0.0f || light_intensity < 0.0f) {
        throw ConfigError("scene speeds and light intensity must be non-negative");
    }
}

std::vector<FrameRecord> generate_scene(const SceneSpec& spec, const std::string& scene_id) {
    spec.validate();
    const Scene s = build_scene(spec);
    const int H = spec.height, W = spec.width;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<FrameRecord> frames;
    frames.reserve(spec.num_frames);
    for (int t = 0; t < spec.num_frames; ++t) {
        FrameRecord fr;
        fr.frame_index = t;
        fr.scene_id = scene_id;
        fr.hdr = Tensor(Shape{3, H, W});
        fr.irradiance = Tensor(Shape{3, H, W});
        fr.object_id = Tensor(Shape{1, H, W});
        fr.gbuffer = {Tensor(Shape{3, H, W}), Tensor(Shape{3, H, W}), Tensor(Shape{1, H, W}), Tensor(Shape{1, H, W}),
                      Tensor(Shape{1, H, W})};
        fr.mv.mv = Tensor(Shape{2, H, W});

        const double theta = s.light_theta + spec.light_speed * t;
        const double light[3] = {std::sin(s.light_elev) * std::cos(theta), std::sin(s.light_elev) * std::sin(theta),
                                 std::cos(s.light_elev)};
        const double cam_y = s.cam_y + s.cam_vy * t, cam_x = s.cam_x + s.cam_vx * t;

        auto albedo = fr.gbuffer.albedo.mutable_data(), normal = fr.gbuffer.normal.mutable_data();
        auto depth = fr.gbuffer.depth.mutable_data(), rough = fr.gbuffer.roughness.mutable_data();
        auto metal = fr.gbuffer.metallic.mutable_data(), mv = fr.mv.mv.mutable_data();
        auto irr = fr.irradiance.mutable_data(), ids = fr.object_id.mutable_data();
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double wy = y + cam_y, wx = x + cam_x;
                Surface best = background(s, wy, wx);
                for (std::size_t k = 0; k < s.objects.size(); ++k) {
                    Surface f{};
                    if (hit(s, s.objects[k], static_cast<int>(k), wy, wx, t, f) && f.depth < best.depth) best = f;
                }
                const std::size_t i = static_cast<std::size_t>(y) * W + x;
                const double ndotl =
                    std::max(0.0, best.normal[0] * light[0] + best.normal[1] * light[1] + best.normal[2] * light[2]);
                for (int c = 0; c < 3; ++c) {
                    albedo[c * plane + i] = static_cast<float>(best.albedo[c]);
                    normal[c * plane + i] = static_cast<float>(best.normal[c]);
                    irr[c * plane + i] =
                        static_cast<float>(s.ambient * s.tint[c] + spec.light_intensity * s.tint[c] * ndotl);
                }
                depth[i] = static_cast<float>(best.depth);
                rough[i] = static_cast<float>(best.roughness);
                metal[i] = static_cast<float>(best.metallic);
                mv[i] = static_cast<float>(best.mvy);
                mv[plane + i] = static_cast<float>(best.mvx);
                ids[i] = static_cast<float>(best.id);
            }
        // Shade with the same BRDF factor the pipeline demodulates by.
        const BrdfFactor f = compute_brdf_factor(fr.gbuffer);
        auto hdr = fr.hdr.mutable_data();
        auto fd = f.f.data();
        for (std::size_t i = 0; i < hdr.size(); ++i) hdr[i] = fd[i] * irr[i];
        frames.push_back(std::move(fr));
    }
    return frames;
}

Tensor downsample_nearest(const Tensor& in, float s) {
    if (!(s >= 1.0f)) throw ConfigError("downsample_nearest: scale must be >= 1, got " + std::to_string(s));
    if (in.ndim() != 3) throw ShapeError("downsample_nearest: expected C x H x W, got " + shape_str(in.shape()));
    const int h = static_cast<int>(std::floor(in.dim(1) / static_cast<double>(s)));
    const int w = static_cast<int>(std::floor(in.dim(2) / static_cast<double>(s)));
    if (h < 8 || w < 8) {
        throw ConfigError("downsample_nearest: target " + std::to_string(h) + "x" + std::to_string(w) +
                          " is smaller than 8 px");
    }
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    Tensor out(Shape{C, h, w});
    auto src = in.data();
    auto dst = out.mutable_data();
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y) {
            const int sy = std::min(H - 1, static_cast<int>(std::floor((y + 0.5) * s)));
            for (int x = 0; x < w; ++x) {
                const int sx = std::min(W - 1, static_cast<int>(std::floor((x + 0.5) * s)));
                dst[(static_cast<std::size_t>(c) * h + y) * w + x] = src[(static_cast<std::size_t>(c) * H + sy) * W + sx];
            }
        }
    return out;
}

Tensor downsample_nearest_to(const Tensor& in, int h, int w) {
    if (in.ndim() != 3 || h <= 0 || w <= 0 || h > in.dim(1) || w > in.dim(2)) {
        throw ShapeError("downsample_nearest_to: cannot map " + shape_str(in.shape()) + " onto " + std::to_string(h) +
                         "x" + std::to_string(w));
    }
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const double ry = static_cast<double>(H) / h, rx = static_cast<double>(W) / w;
    Tensor out(Shape{C, h, w});
    auto src = in.data();
    auto dst = out.mutable_data();
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y) {
            const int sy = std::min(H - 1, static_cast<int>(std::floor((y + 0.5) * ry)));
            for (int x = 0; x < w; ++x) {
                const int sx = std::min(W - 1, static_cast<int>(std::floor((x + 0.5) * rx)));
                dst[(static_cast<std::size_t>(c) * h + y) * w + x] = src[(static_cast<std::size_t>(c) * H + sy) * W + sx];
            }
        }
    return out;
}

GBuffer downsample_nearest_to(const GBuffer& g, int h, int w) {
    return {downsample_nearest_to(g.albedo, h, w), downsample_nearest_to(g.normal, h, w),
            downsample_nearest_to(g.depth, h, w), downsample_nearest_to(g.roughness, h, w),
            downsample_nearest_to(g.metallic, h, w)};
}

}  // namespace wsr
