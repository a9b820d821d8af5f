#pragma once

#include <cstdint>
#include <vector>

#include "lfsep/grid.hpp"

namespace lfsep {

/// Occluding random discs with density ~ 1/r^3 on [r_min, r_max] px, values in
/// [0.1, 1]. Discs are added until the image is covered (or after 64 x area/r_min^2 draws).
Image dead_leaves(Extent size, std::uint64_t seed, double r_min = 1.5, double r_max = 10.0);

/// Sum of bilinear value-noise octaves (persistence 0.5), rescaled to [0.1, 1].
Image fractal_noise(Extent size, std::uint64_t seed, int octaves = 4, int base_cell = 8);

/// Deterministic procedural corpus alternating dead-leaves and fractal-noise images.
std::vector<Image> texture_corpus(Extent size, int count, std::uint64_t seed);

/// Affine rescale of `img` into [lo, hi]; a constant image maps to lo.
Image rescale(const Image& img, double lo, double hi);

}  // namespace lfsep
