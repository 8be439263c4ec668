#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wavesr/shading.hpp"
#include "wavesr/temporal.hpp"
#include "wavesr/tensor.hpp"
#include "wavesr/wavelet.hpp"

namespace wsr {

enum class Variant { standard, fusion_ll_split, multi_inr, no_wavelet };
std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct ModelConfig {
    std::optional<WaveletSpec> wavelet = WaveletSpec{Transform::swt, Basis::haar, 1};
    Variant variant = Variant::standard;
    int base_channels = 32;
    int inr_hidden = 64;
    int inr_layers = 3;
    int freq_channels = 16;  // K
    int lr_blocks = 2;
    int rir_blocks = 3;
    int lwgc_layers = 2;
    float scale_min = 2.0f;
    float scale_max = 4.0f;
    float head_init_scale = 1e-2f;  // reconstruction head starts near the prior
    std::uint64_t seed = 0;

    /// Throws ConfigError on invalid sizes or variant/wavelet mismatch.
    void validate() const;
    bool decimated() const { return wavelet && wavelet->transform == Transform::dwt; }

    /// key = value lines, one per field.
    std::string to_text() const;
    static ModelConfig from_text(const std::string& text);
};

/// A(x) [cos; sin](pi <F(x), x> + phi(x)), per frequency channel k:
/// out[2k] = A_k cos(theta_k), out[2k+1] = A_k sin(theta_k) with
/// theta_k = pi (F[2k] y + F[2k+1] x) + phi_k. coords is 2 x H x W (y, x).
/// Differentiable w.r.t. amplitude, frequency and phase.
Tensor fourier_embed(const Tensor& coords, const Tensor& amplitude, const Tensor& frequency, const Tensor& phase);

/// Pixel-centre coordinates normalised to [0, 1]: ((i + .5) / H, (j + .5) / W).
Tensor unit_coords(int height, int width);

struct ModelInputs {
    Tensor l_lr;           // 3 x h x w demodulated LR irradiance, h and w even
    GBuffer g_hr;          // H x W
    Tensor l_prev_warped;  // 3 x H x W
    MaskPair masks;        // H x W
    float scale = 2.0f;
};

struct ModelOutputs {
    Tensor coeffs;       // packed 12-channel subbands; undefined for no_wavelet
    Tensor image;        // 3 x H x W predicted HR irradiance
    Tensor mask_logits;  // 1 x H x W
};

struct Conv {
    Tensor w, b;
    Tensor operator()(const Tensor& x, int padding, int stride = 1) const;
};

class Model {
public:
    explicit Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    ModelOutputs forward(const ModelInputs& in) const;

    /// Stable, ordered parameter list.
    const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }
    std::size_t parameter_count() const;
    /// One line per parameter tensor plus a total.
    std::string summary() const;

    // Sub-networks, exposed for testing.
    Tensor lr_features(const Tensor& l_lr) const;
    Tensor gbuffer_features(const GBuffer& g) const;
    Tensor rir_block(const Tensor& x, int index) const;
    Tensor temporal_features(const Tensor& l_prev_warped, const MaskPair& masks) const;
    Tensor lwgc(const Tensor& x, int index) const;
    Conv& conv(const std::string& name);

private:
    Conv make_conv(const std::string& name, int in, int out, int k, float init_scale = 1.0f);
    Tensor inr_mlp(const Tensor& x, int index) const;

    ModelConfig cfg_;
    std::vector<std::pair<std::string, Tensor>> params_;
    std::map<std::string, Conv> convs_;
    std::uint64_t init_counter_ = 0;
};

/// Inverse transform inside the graph. DWT coefficients are pixel-shuffled
/// into their spatial arrangement before synthesis.
Tensor reconstruct(const Tensor& packed, const WaveletSpec& spec);
Tensor reconstruct(const SubbandSet& sub);

/// Wavelet coefficients of the bilinearly upsampled LR frame; the head adds
/// its prediction to these.
Tensor upsampled_prior(const Tensor& l_lr, int height, int width);

// WDSS checkpoints.
inline constexpr char kCheckpointMagic[4] = {'W', 'D', 'S', 'S'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig config;
    std::vector<std::pair<std::string, Tensor>> tensors;  // parameters, then optimiser state
    std::map<std::string, std::string> extra;             // additional key = value lines
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Copies matching parameters into `model`; throws FormatError if any model
/// parameter is missing or mis-shaped.
void load_parameters(Model& model, const Checkpoint& ck);

}  // namespace wsr
