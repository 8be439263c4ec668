#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "wavesr/tensor.hpp"

namespace wsr {

enum class Transform { dwt, swt };
enum class Basis { haar, db4, sym4 };

std::string to_string(Transform t);
std::string to_string(Basis b);
Transform parse_transform(std::string_view s);
Basis parse_basis(std::string_view s);

/// Transform type and orthogonal basis. Single-level only.
struct WaveletSpec {
    Transform transform = Transform::swt;
    Basis basis = Basis::haar;
    int levels = 1;

    bool operator==(const WaveletSpec&) const = default;
};

std::string to_string(const WaveletSpec& spec);  // e.g. "swt-haar"
/// Inverse of to_string(spec); single level. Throws ConfigError.
WaveletSpec parse_wavelet_spec(const std::string& s);

/// Analysis/synthesis filters. dec_hi[k] = (-1)^k dec_lo[L-1-k]; the
/// reconstruction filters are the time reverses of the analysis ones.
struct FilterBank {
    Basis basis = Basis::haar;
    std::vector<double> dec_lo, dec_hi, rec_lo, rec_hi;

    int length() const { return static_cast<int>(dec_lo.size()); }
};

FilterBank make_filter_bank(Basis basis);

enum class SubbandLayout { full_resolution, decimated };

/// Single-level 2-D subbands, each with the image's colour channels.
/// Naming: first letter is the filter along x (width), second along y.
/// LH therefore responds to horizontal lines, HL to vertical ones.
struct SubbandSet {
    Tensor ll, lh, hl, hh;
    SubbandLayout layout = SubbandLayout::full_resolution;
    WaveletSpec spec;
};

// Subband index inside a packed coefficient tensor.
enum Band : int { kLL = 0, kLH = 1, kHL = 2, kHH = 3 };

/// Packed analysis: C x H x W -> 4C x H' x W' with channels
/// [LL_c, LH_c, HL_c, HH_c] per input channel c. H' = H for SWT, H/2 for DWT.
/// Periodic boundary extension. Differentiable.
Tensor analyze(const Tensor& image, const WaveletSpec& spec);
Tensor analyze(const Tensor& image, const FilterBank& bank, Transform transform);

/// Exact inverse of analyze(). For SWT this is the average over the
/// redundant shifted reconstructions (a quarter of the adjoint).
Tensor synthesize(const Tensor& packed, const WaveletSpec& spec);
Tensor synthesize(const Tensor& packed, const FilterBank& bank, Transform transform);

/// DWT synthesis reading coefficients from their spatial (pixel-shuffled)
/// arrangement: pixel (2y+dy, 2x+dx) of channel c holds band dy*2+dx.
Tensor dwt_synthesize_interleaved(const Tensor& interleaved, const FilterBank& bank);

SubbandSet dwt_forward(const Tensor& image, const FilterBank& bank);
Tensor dwt_inverse(const SubbandSet& sub, const FilterBank& bank);
SubbandSet swt_forward(const Tensor& image, const FilterBank& bank);
Tensor swt_inverse(const SubbandSet& sub, const FilterBank& bank);

/// Splits a packed tensor into its four subbands (differentiable).
SubbandSet unpack_subbands(const Tensor& packed, SubbandLayout layout, const WaveletSpec& spec);
/// Interleaves four subbands back into packed channel order (differentiable).
Tensor pack_subbands(const SubbandSet& sub);

/// Space-to-depth DWT layout: 12 x H/2 x W/2 for an RGB image.
Tensor pack_dwt_channels(const SubbandSet& sub);
SubbandSet unpack_dwt_channels(const Tensor& packed, const WaveletSpec& spec);

/// Forward/inverse dispatch on spec.transform.
SubbandSet decompose(const Tensor& image, const WaveletSpec& spec);
Tensor reconstruct_subbands(const SubbandSet& sub);

}  // namespace wsr
