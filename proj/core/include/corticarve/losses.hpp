#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "corticarve/volume.hpp"

namespace corticarve {

struct LossResult {
  double value = 0.0;
  /// d(value)/d(prediction), same layout as the prediction.
  std::vector<double> gradient;
};

/// Weighted mean squared error sum_i w_i (d_i - t_i)^2 / sum_i w_i.
LossResult sdt_loss(std::span<const double> prediction, std::span<const double> target,
                    std::span<const double> weights);
LossResult sdt_loss(const SdtVolume& prediction, const SdtVolume& target, const ScalarVolume& weights);

struct DiceLossResult : LossResult {
  /// Set when a class is empty in both prediction and target; that class then
  /// scores as perfect.
  bool empty_class = false;
};

/// Two-class soft Dice loss: 1 - sum_c |y_c * t_c| / |y_c + t_c|, where
/// `probabilities` holds the non-brain channel followed by the brain channel
/// (2 * N values) and `target` the brain mask (N values). Each ratio is at most
/// 0.5, so perfect binary agreement gives 0.
DiceLossResult dice_loss(std::span<const double> probabilities, std::span<const std::uint8_t> target);

}  // namespace corticarve
