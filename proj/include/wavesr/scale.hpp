#pragma once

#include <cmath>

#include "wavesr/error.hpp"

namespace wsr {

/// HR extent for an LR extent at scale s: round(s * lr), rounded up to even
/// when `even` (decimated transforms need even sides).
inline int hr_extent(int lr, float s, bool even) {
    int hr = static_cast<int>(std::lround(static_cast<double>(s) * lr));
    if (even && hr % 2 != 0) ++hr;
    return hr;
}

/// LR extent for an HR extent at scale s: floor(hr / s), made even so the
/// LR frame can be pixel-unshuffled by 2.
inline int lr_extent(int hr, float s) {
    int lr = static_cast<int>(std::floor(static_cast<double>(hr) / s));
    return lr - lr % 2;
}

}  // namespace wsr
