#include "corticarve/losses.hpp"

#include <cmath>

namespace corticarve {

LossResult sdt_loss(std::span<const double> prediction, std::span<const double> target,
                    std::span<const double> weights) {
  const std::size_t n = prediction.size();
  if (target.size() != n || weights.size() != n) {
    throw Error(Errc::invalid_argument, "sdt_loss: prediction, target and weights differ in length");
  }
  double weight_sum = 0.0;
  for (double w : weights) weight_sum += w;
  if (!(weight_sum > 0.0)) throw Error(Errc::invalid_argument, "sdt_loss: weights sum to zero");

  LossResult out;
  out.gradient.resize(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = prediction[i] - target[i];
    acc += weights[i] * r * r;
    out.gradient[i] = 2.0 * weights[i] * r / weight_sum;
  }
  out.value = acc / weight_sum;
  return out;
}

LossResult sdt_loss(const SdtVolume& prediction, const SdtVolume& target, const ScalarVolume& weights) {
  require_same_grid(prediction.grid, target.grid, "sdt_loss");
  require_same_grid(prediction.grid, weights.grid, "sdt_loss");
  return sdt_loss(prediction.data, target.data, weights.data);
}

DiceLossResult dice_loss(std::span<const double> probabilities, std::span<const std::uint8_t> target) {
  const std::size_t n = target.size();
  if (probabilities.size() != 2 * n) {
    throw Error(Errc::invalid_argument, "dice_loss: expected two probability channels per voxel");
  }
  DiceLossResult out;
  out.gradient.assign(2 * n, 0.0);
  double score = 0.0;
  for (int c = 0; c < 2; ++c) {
    const double* y = probabilities.data() + c * n;
    double overlap = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = c == 1 ? target[i] : 1.0 - target[i];
      overlap += y[i] * t;
      total += y[i] + t;
    }
    if (total == 0.0) {
      out.empty_class = true;
      score += 0.5;
      continue;
    }
    score += overlap / total;
    // d(overlap/total)/dy_i = (t_i * total - overlap) / total^2; the loss negates it.
    double* g = out.gradient.data() + c * n;
    const double inv2 = 1.0 / (total * total);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = c == 1 ? target[i] : 1.0 - target[i];
      g[i] = -(t * total - overlap) * inv2;
    }
  }
  out.value = 1.0 - score;
  return out;
}

}  // namespace corticarve
