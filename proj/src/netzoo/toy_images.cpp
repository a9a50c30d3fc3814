#include "ngraph/netzoo/toy_images.hpp"

#include <algorithm>
#include <cmath>

namespace ngraph::zoo {

std::vector<double> render_shape(ShapeFamily family, std::size_t size, ad::Rng& rng) {
  std::vector<double> img(size * size, 0.0);
  const double n = static_cast<double>(size);
  switch (family) {
    case ShapeFamily::bar: {
      bool horizontal = rng.bernoulli(0.5);
      std::size_t thick = std::max<std::size_t>(2, size / 5 + rng.index(2));
      std::size_t start = rng.index(size - thick + 1);
      for (std::size_t r = 0; r < size; ++r)
        for (std::size_t c = 0; c < size; ++c) {
          std::size_t coord = horizontal ? r : c;
          if (coord >= start && coord < start + thick) img[r * size + c] = 1.0;
        }
      break;
    }
    case ShapeFamily::disk: {
      double radius = n * rng.uniform(0.2, 0.35);
      double cy = (n - 1) / 2 + rng.uniform(-1.0, 1.0);
      double cx = (n - 1) / 2 + rng.uniform(-1.0, 1.0);
      for (std::size_t r = 0; r < size; ++r)
        for (std::size_t c = 0; c < size; ++c) {
          double dy = static_cast<double>(r) - cy, dx = static_cast<double>(c) - cx;
          if (dy * dy + dx * dx <= radius * radius) img[r * size + c] = 1.0;
        }
      break;
    }
    case ShapeFamily::checker: {
      std::size_t cell = std::max<std::size_t>(2, size / 8 + rng.index(3));
      std::size_t oy = rng.index(cell), ox = rng.index(cell);
      for (std::size_t r = 0; r < size; ++r)
        for (std::size_t c = 0; c < size; ++c)
          img[r * size + c] = (((r + oy) / cell + (c + ox) / cell) % 2 == 0) ? 1.0 : 0.0;
      break;
    }
  }
  return img;
}

ImageSet make_toy_image_set(std::size_t per_class, std::size_t size, double noise, ad::Rng& rng) {
  std::size_t count = per_class * kNumShapeFamilies;
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i % kNumShapeFamilies;
  rng.shuffle(order);
  std::vector<double> data;
  data.reserve(count * size * size);
  ImageSet set;
  for (std::size_t label : order) {
    auto img = render_shape(static_cast<ShapeFamily>(label), size, rng);
    for (double& v : img) v = std::clamp(v + noise * rng.normal(), -1.0, 2.0);
    data.insert(data.end(), img.begin(), img.end());
    set.labels.push_back(label);
  }
  set.images = ad::Tensor::from({count, 1, size, size}, std::move(data));
  return set;
}

}  // namespace ngraph::zoo
