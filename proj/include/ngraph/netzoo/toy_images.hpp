#pragma once

#include <cstddef>
#include <vector>

#include "ngraph/autodiff/ops.hpp"
#include "ngraph/autodiff/rng.hpp"

namespace ngraph::zoo {

/// Synthetic grayscale shape families, pixel values in [0, 1].
enum class ShapeFamily { bar, disk, checker };
inline constexpr std::size_t kNumShapeFamilies = 3;

/// Row-major size x size image of the family with randomized placement.
std::vector<double> render_shape(ShapeFamily family, std::size_t size, ad::Rng& rng);

/// Labelled image set: images [N, 1, size, size], labels in {0,1,2}.
struct ImageSet {
  ad::Tensor images;
  ad::Index labels;
};

/// Balanced noisy shape-classification set used to train zoo members.
ImageSet make_toy_image_set(std::size_t per_class, std::size_t size, double noise, ad::Rng& rng);

}  // namespace ngraph::zoo
