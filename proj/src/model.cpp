#include "wavesr/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "wavesr/error.hpp"
#include "wavesr/ops.hpp"
#include "wavesr/random.hpp"
#include "wavesr/scale.hpp"

namespace wsr {

namespace {

constexpr float kPi = std::numbers::pi_v<float>;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError("model config '" + key + "': expected an integer, got '" + v + "'");
}

float parse_float(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const float out = std::stof(v, &used);
        if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError("model config '" + key + "': expected a number, got '" + v + "'");
}

// Channel order [ll_0..ll_2, detail(c, band 1..3)] -> packed [4c + band].
std::vector<int> ll_split_order() {
    std::vector<int> idx(12);
    for (int c = 0; c < 3; ++c) {
        idx[4 * c] = c;
        for (int b = 1; b < 4; ++b) idx[4 * c + b] = 3 + 3 * c + (b - 1);
    }
    return idx;
}

// Channel order [band 0 (c0..c2), band 1 (...), ...] -> packed [4c + band].
std::vector<int> band_major_order() {
    std::vector<int> idx(12);
    for (int c = 0; c < 3; ++c)
        for (int b = 0; b < 4; ++b) idx[4 * c + b] = 3 * b + c;
    return idx;
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::standard: return "standard";
        case Variant::fusion_ll_split: return "fusion_ll_split";
        case Variant::multi_inr: return "multi_inr";
        case Variant::no_wavelet: return "no_wavelet";
    }
    return "?";
}

Variant parse_variant(const std::string& s) {
    if (s == "standard") return Variant::standard;
    if (s == "fusion_ll_split") return Variant::fusion_ll_split;
    if (s == "multi_inr") return Variant::multi_inr;
    if (s == "no_wavelet") return Variant::no_wavelet;
    throw ConfigError("unknown model variant '" + s + "'");
}

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v <= 0) throw ConfigError(std::string("model ") + name + " must be positive, got " + std::to_string(v));
    };
    positive(base_channels, "base_channels");
    positive(inr_hidden, "inr_hidden");
    positive(freq_channels, "freq_channels");
    if (inr_layers < 2) throw ConfigError("model inr_layers must be at least 2");
    if (lr_blocks < 0 || rir_blocks < 0) throw ConfigError("model block counts must be non-negative");
    positive(lwgc_layers, "lwgc_layers");
    if (!(scale_min >= 1.0f) || !(scale_max >= scale_min)) {
        throw ConfigError("model scale range must satisfy 1 <= min <= max");
    }
    if (!(head_init_scale >= 0.0f)) throw ConfigError("model head_init_scale must be non-negative");
    if (wavelet && wavelet->levels != 1) throw ConfigError("only single-level wavelet transforms are supported");
    if (variant == Variant::no_wavelet && wavelet) throw ConfigError("variant no_wavelet requires wavelet = none");
    if (variant != Variant::no_wavelet && !wavelet) {
        throw ConfigError("variant " + to_string(variant) + " requires a wavelet");
    }
}

std::string ModelConfig::to_text() const {
    std::ostringstream s;
    s << "wavelet = " << (wavelet ? to_string(*wavelet) : std::string("none")) << '\n'
      << "variant = " << to_string(variant) << '\n'
      << "base_channels = " << base_channels << '\n'
      << "inr_hidden = " << inr_hidden << '\n'
      << "inr_layers = " << inr_layers << '\n'
      << "freq_channels = " << freq_channels << '\n'
      << "lr_blocks = " << lr_blocks << '\n'
      << "rir_blocks = " << rir_blocks << '\n'
      << "lwgc_layers = " << lwgc_layers << '\n'
      << "scale_min = " << scale_min << '\n'
      << "scale_max = " << scale_max << '\n'
      << "head_init_scale = " << head_init_scale << '\n'
      << "seed = " << seed << '\n';
    return s.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
    ModelConfig c;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("model config line without '=': '" + line + "'");
        const std::string key = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
        if (key == "wavelet") c.wavelet = (v == "none") ? std::nullopt : std::optional(parse_wavelet_spec(v));
        else if (key == "variant") c.variant = parse_variant(v);
        else if (key == "base_channels") c.base_channels = parse_int(key, v);
        else if (key == "inr_hidden") c.inr_hidden = parse_int(key, v);
        else if (key == "inr_layers") c.inr_layers = parse_int(key, v);
        else if (key == "freq_channels") c.freq_channels = parse_int(key, v);
        else if (key == "lr_blocks") c.lr_blocks = parse_int(key, v);
        else if (key == "rir_blocks") c.rir_blocks = parse_int(key, v);
        else if (key == "lwgc_layers") c.lwgc_layers = parse_int(key, v);
        else if (key == "scale_min") c.scale_min = parse_float(key, v);
        else if (key == "scale_max") c.scale_max = parse_float(key, v);
        else if (key == "head_init_scale") c.head_init_scale = parse_float(key, v);
        else if (key == "seed") c.seed = std::stoull(v);
        else throw ConfigError("unknown model config key '" + key + "'");
    }
    return c;
}

Tensor unit_coords(int height, int width) {
    Tensor c(Shape{2, height, width});
    auto d = c.mutable_data();
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            d[static_cast<std::size_t>(y) * width + x] = (y + 0.5f) / height;
            d[plane + static_cast<std::size_t>(y) * width + x] = (x + 0.5f) / width;
        }
    return c;
}

Tensor fourier_embed(const Tensor& coords, const Tensor& amplitude, const Tensor& frequency, const Tensor& phase) {
    if (coords.ndim() != 3 || coords.dim(0) != 2 || amplitude.ndim() != 3) {
        throw ShapeError("fourier_embed: coords must be 2 x H x W and amplitude K x H x W");
    }
    const int K = amplitude.dim(0), H = amplitude.dim(1), W = amplitude.dim(2);
    const Shape grid{H, W};
    if (coords.dim(1) != H || coords.dim(2) != W || frequency.shape() != Shape{2 * K, H, W} ||
        phase.shape() != Shape{K, H, W}) {
        throw ShapeError("fourier_embed: amplitude " + shape_str(amplitude.shape()) + ", frequency " +
                         shape_str(frequency.shape()) + " and phase " + shape_str(phase.shape()) +
                         " disagree (need K, 2K, K channels on one grid)");
    }
    const std::size_t P = static_cast<std::size_t>(H) * W;
    auto cy = coords.data().subspan(0, P), cx = coords.data().subspan(P, P);
    auto a = amplitude.data(), f = frequency.data(), ph = phase.data();
    std::vector<float> out(2 * K * P), cos_t(K * P), sin_t(K * P);
    for (int k = 0; k < K; ++k)
        for (std::size_t p = 0; p < P; ++p) {
            const float theta = kPi * (f[2 * k * P + p] * cy[p] + f[(2 * k + 1) * P + p] * cx[p]) + ph[k * P + p];
            const float c = std::cos(theta), s = std::sin(theta);
            cos_t[k * P + p] = c;
            sin_t[k * P + p] = s;
            out[2 * k * P + p] = a[k * P + p] * c;
            out[(2 * k + 1) * P + p] = a[k * P + p] * s;
        }
    return detail::make_result(
        Shape{2 * K, H, W}, std::move(out), "fourier_embed", {amplitude, frequency, phase},
        [coords, amplitude, frequency, phase, cos_t = std::move(cos_t), sin_t = std::move(sin_t), K,
         P](const detail::TensorImpl& o) {
            auto ga = detail::grad_sink(amplitude);
            auto gf = detail::grad_sink(frequency);
            auto gp = detail::grad_sink(phase);
            auto cy = coords.data().subspan(0, P), cx = coords.data().subspan(P, P);
            auto a = amplitude.data();
            for (int k = 0; k < K; ++k)
                for (std::size_t p = 0; p < P; ++p) {
                    const std::size_t i = k * P + p;
                    const float gc = o.grad[2 * k * P + p], gs = o.grad[(2 * k + 1) * P + p];
                    if (!ga.empty()) ga[i] += gc * cos_t[i] + gs * sin_t[i];
                    const float dtheta = a[i] * (gs * cos_t[i] - gc * sin_t[i]);
                    if (!gp.empty()) gp[i] += dtheta;
                    if (!gf.empty()) {
                        gf[2 * k * P + p] += dtheta * kPi * cy[p];
                        gf[(2 * k + 1) * P + p] += dtheta * kPi * cx[p];
                    }
                }
        });
}

Tensor Conv::operator()(const Tensor& x, int padding, int stride) const { return conv2d(x, w, b, stride, padding); }

Conv Model::make_conv(const std::string& name, int in, int out, int k, float init_scale) {
    std::mt19937_64 rng(derive_seed(cfg_.seed, {fnv1a(name)}));
    const float bound = init_scale * std::sqrt(6.0f / static_cast<float>(in * k * k));
    std::uniform_real_distribution<float> dist(-bound, bound);
    Conv c{Tensor(Shape{out, in, k, k}), Tensor(Shape{out})};
    for (float& v : c.w.mutable_data()) v = dist(rng);
    c.w.set_requires_grad(true);
    c.b.set_requires_grad(true);
    params_.emplace_back(name + ".weight", c.w);
    params_.emplace_back(name + ".bias", c.b);
    convs_[name] = c;
    return c;
}

Conv& Model::conv(const std::string& name) {
    auto it = convs_.find(name);
    if (it == convs_.end()) throw ParamError("model has no layer '" + name + "'");
    return it->second;
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int C = cfg_.base_channels, K = cfg_.freq_channels, Hd = cfg_.inr_hidden;
    make_conv("lr.entry", 12, C, 3);
    for (int i = 0; i < cfg_.lr_blocks; ++i) make_conv("lr.block" + std::to_string(i), C, C, 3);

    make_conv("gb.entry", 9, C, 3);
    for (int i = 0; i < cfg_.rir_blocks; ++i) {
        const std::string p = "gb.rir" + std::to_string(i);
        make_conv(p + ".expand", C, 2 * C, 1);
        make_conv(p + ".inner", 2 * C, 2 * C, 3);
        make_conv(p + ".reduce", 2 * C, C, 1);
    }

    for (int i = 0; i < cfg_.lwgc_layers; ++i) {
        const std::string p = "tfe.lwgc" + std::to_string(i);
        const int in = i == 0 ? 5 : C;
        make_conv(p + ".feature", in, C, 3);
        make_conv(p + ".gate", in, C, 3);
    }

    make_conv("fusion.0", 3 * C, C, 3);
    make_conv("fusion.1", C, C, 3);
    make_conv("mask.head", C, 1, 3);

    make_conv("inr.amplitude", C, K, 1);
    make_conv("inr.frequency", C, 2 * K, 1);
    make_conv("inr.phase", C, K, 1);
    const int mlps = cfg_.variant == Variant::multi_inr ? 4 : 1;
    for (int m = 0; m < mlps; ++m) {
        const std::string p = "inr.mlp" + std::to_string(m);
        for (int l = 0; l < cfg_.inr_layers; ++l) {
            const int in = l == 0 ? 2 * K + C : Hd;
            const int out = l + 1 == cfg_.inr_layers ? C : Hd;
            make_conv(p + ".layer" + std::to_string(l), in, out, 1);
        }
    }

    const float hs = cfg_.head_init_scale;
    switch (cfg_.variant) {
        case Variant::no_wavelet: make_conv("head", C, 3, 3, hs); break;
        case Variant::standard: make_conv("head", C, 12, 3, hs); break;
        case Variant::fusion_ll_split:
            make_conv("head.ll", C, 3, 3, hs);
            make_conv("head.detail", C, 9, 3, hs);
            break;
        case Variant::multi_inr:
            for (int b = 0; b < 4; ++b) make_conv("head.band" + std::to_string(b), C, 3, 3, hs);
            break;
    }
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

std::string Model::summary() const {
    std::ostringstream s;
    s << "model " << to_string(cfg_.variant) << " wavelet=" << (cfg_.wavelet ? to_string(*cfg_.wavelet) : "none")
      << '\n';
    for (const auto& [name, t] : params_) s << "  " << name << ' ' << shape_str(t.shape()) << ' ' << t.numel() << '\n';
    s << "total parameters " << parameter_count() << '\n';
    return s.str();
}

Tensor Model::lr_features(const Tensor& l_lr) const {
    const auto& c = convs_;
    Tensor x = leaky_relu(c.at("lr.entry")(pixel_unshuffle(l_lr, 2), 1));
    for (int i = 0; i < cfg_.lr_blocks; ++i) x = leaky_relu(c.at("lr.block" + std::to_string(i))(x, 1));
    return x;
}

Tensor Model::rir_block(const Tensor& x, int index) const {
    const std::string p = "gb.rir" + std::to_string(index);
    Tensor y = leaky_relu(convs_.at(p + ".expand")(x, 0));
    y = leaky_relu(convs_.at(p + ".inner")(y, 1));
    return add(x, convs_.at(p + ".reduce")(y, 0));
}

Tensor Model::gbuffer_features(const GBuffer& g) const {
    Tensor depth = g.depth.clone();
    for (float& v : depth.mutable_data()) v = std::log1p(std::max(v, 0.0f));
    const Tensor in = concat_channels({g.albedo, g.normal, depth, g.roughness, g.metallic});
    Tensor x = leaky_relu(convs_.at("gb.entry")(in, 1));
    for (int i = 0; i < cfg_.rir_blocks; ++i) x = rir_block(x, i);
    return x;
}

Tensor Model::lwgc(const Tensor& x, int index) const {
    const std::string p = "tfe.lwgc" + std::to_string(index);
    return mul(convs_.at(p + ".feature")(x, 1), sigmoid(convs_.at(p + ".gate")(x, 1)));
}

Tensor Model::temporal_features(const Tensor& l_prev_warped, const MaskPair& masks) const {
    Tensor x = concat_channels({l_prev_warped, masks.spatial, masks.temporal});
    for (int i = 0; i < cfg_.lwgc_layers; ++i) x = lwgc(x, i);
    return x;
}

Tensor Model::inr_mlp(const Tensor& x, int index) const {
    const std::string p = "inr.mlp" + std::to_string(index);
    Tensor y = x;
    for (int l = 0; l < cfg_.inr_layers; ++l) {
        y = convs_.at(p + ".layer" + std::to_string(l))(y, 0);
        if (l + 1 < cfg_.inr_layers) y = relu(y);
    }
    return y;
}

Tensor upsampled_prior(const Tensor& l_lr, int height, int width) {
    NoGradGuard guard;
    return upsample_bilinear(l_lr.detach(), height, width);
}

Tensor reconstruct(const Tensor& packed, const WaveletSpec& spec) {
    if (spec.transform == Transform::dwt) {
        if (packed.ndim() != 3 || packed.dim(0) % 4 != 0) {
            throw ShapeError("reconstruct: packed DWT coefficients must have 4C channels, got " +
                             shape_str(packed.shape()));
        }
        return dwt_synthesize_interleaved(pixel_shuffle(packed, 2), make_filter_bank(spec.basis));
    }
    return synthesize(packed, spec);
}

Tensor reconstruct(const SubbandSet& sub) {
    const bool decimated = sub.layout == SubbandLayout::decimated;
    if (decimated != (sub.spec.transform == Transform::dwt)) {
        throw ShapeError("reconstruct: subband layout does not match " + to_string(sub.spec));
    }
    return reconstruct(pack_subbands(sub), sub.spec);
}

ModelOutputs Model::forward(const ModelInputs& in) const {
    constexpr float kScaleSlack = 1e-6f;
    if (!(in.scale >= cfg_.scale_min - kScaleSlack && in.scale <= cfg_.scale_max + kScaleSlack)) {
        throw ConfigError("scale " + std::to_string(in.scale) + " outside the model range [" +
                          std::to_string(cfg_.scale_min) + ", " + std::to_string(cfg_.scale_max) + "]");
    }
    if (in.l_lr.ndim() != 3 || in.l_lr.dim(0) != 3) {
        throw ShapeError("forward: LR frame must be 3 x h x w, got " + shape_str(in.l_lr.shape()));
    }
    const int h = in.l_lr.dim(1), w = in.l_lr.dim(2);
    const int H = hr_extent(h, in.scale, cfg_.decimated()), W = hr_extent(w, in.scale, cfg_.decimated());
    if (in.g_hr.height() != H || in.g_hr.width() != W) {
        throw ShapeError("forward: HR G-buffer is " + std::to_string(in.g_hr.height()) + "x" +
                         std::to_string(in.g_hr.width()) + " but scale " + std::to_string(in.scale) + " on " +
                         std::to_string(h) + "x" + std::to_string(w) + " needs " + std::to_string(H) + "x" +
                         std::to_string(W));
    }
    if (cfg_.decimated() && (H % 2 || W % 2)) throw ShapeError("forward: DWT needs even HR dimensions");

    const Tensor lr_up = upsample_bilinear(lr_features(in.l_lr), H, W);
    const Tensor gb = gbuffer_features(in.g_hr);
    const Tensor tf = temporal_features(in.l_prev_warped, in.masks);
    const Tensor fusion =
        convs_.at("fusion.1")(leaky_relu(convs_.at("fusion.0")(concat_channels({lr_up, gb, tf}), 1)), 1);

    ModelOutputs out;
    out.mask_logits = convs_.at("mask.head")(fusion, 1);

    const Tensor embedding = fourier_embed(unit_coords(H, W), convs_.at("inr.amplitude")(lr_up, 0),
                                           convs_.at("inr.frequency")(gb, 0), convs_.at("inr.phase")(gb, 0));
    const Tensor inr_in = concat_channels({embedding, lr_up});
    const Tensor image_prior = upsampled_prior(in.l_lr, H, W);

    auto head = [&](const std::string& name, const Tensor& x) {
        // DWT: stride 2 lands directly on the decimated coefficient grid.
        return convs_.at(name)(x, 1, cfg_.decimated() ? 2 : 1);
    };

    if (cfg_.variant == Variant::no_wavelet) {
        out.image = add(image_prior, head("head", add(fusion, inr_mlp(inr_in, 0))));
        return out;
    }

    Tensor delta;
    switch (cfg_.variant) {
        case Variant::standard: delta = head("head", add(fusion, inr_mlp(inr_in, 0))); break;
        case Variant::fusion_ll_split: {
            static const std::vector<int> order = ll_split_order();
            delta = gather_channels(concat_channels({head("head.ll", fusion), head("head.detail", inr_mlp(inr_in, 0))}),
                                    order);
            break;
        }
        case Variant::multi_inr: {
            static const std::vector<int> order = band_major_order();
            std::vector<Tensor> bands;
            for (int b = 0; b < 4; ++b) bands.push_back(head("head.band" + std::to_string(b), add(fusion, inr_mlp(inr_in, b))));
            delta = gather_channels(concat_channels(bands), order);
            break;
        }
        case Variant::no_wavelet: break;
    }
    Tensor prior;
    {
        NoGradGuard guard;
        prior = analyze(image_prior, *cfg_.wavelet);
    }
    out.coeffs = add(prior, delta);
    out.image = reconstruct(out.coeffs, *cfg_.wavelet);
    return out;
}

}  // namespace wsr
