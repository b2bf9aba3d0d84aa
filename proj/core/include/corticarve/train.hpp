#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <vector>

#include "corticarve/losses.hpp"
#include "corticarve/nnet.hpp"
#include "corticarve/synthesis.hpp"
#include "corticarve/synthesis_config.hpp"

namespace corticarve {

struct TrainConfig {
  std::int64_t steps = 2000;
  double learning_rate = 1e-4;
  /// Validation (and plateau-rule) cadence in steps; 0 disables validation.
  std::int64_t val_interval = 100;
  int val_samples = 8;
  std::int64_t patience = 20000;
  std::uint64_t seed = 0;
  /// Checkpoint cadence in steps; 0 only writes the final checkpoint (if a path is set).
  std::int64_t checkpoint_interval = 0;
  std::filesystem::path checkpoint_path;
  UNetConfig network;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct ValidationRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  /// Training loss of every optimization step.
  std::vector<double> train_loss;
  std::vector<ValidationRecord> validation;
  TrainState state;
};

/// Seeds of the fixed validation set and of the per-step training samples.
/// They come from separate streams and are checked to be disjoint.
std::vector<std::uint64_t> validation_seeds(const TrainConfig& cfg);
std::uint64_t training_seed(const TrainConfig& cfg, std::int64_t step);

/// Loss and d(loss)/d(output) of one network output against a sample.
LossResult sample_loss(Head head, const Tensor<float>& output, const SynthSample& sample);

/// Mean loss over a fixed list of synthesis seeds.
double validation_loss(const UNet<float>& model, const std::vector<LabelVolume>& label_maps,
                       const SynthesisConfig& synth, const std::vector<std::uint64_t>& seeds);

using StepCallback = std::function<void(std::int64_t step, double loss, const TrainState& state)>;

/// Batch-size-one training: each step picks a label map, synthesizes a fresh
/// sample, and applies one Adam update. Validation runs at step 0 and every
/// `val_interval` steps and drives the plateau schedule. Label maps must match
/// the network input dims. Throws Errc::non_finite (after writing a diagnostic
/// checkpoint next to `checkpoint_path`, if set) when the loss diverges.
TrainHistory train_loop(UNet<float>& model, const std::vector<LabelVolume>& label_maps, const SynthesisConfig& synth,
                        const TrainConfig& cfg, const StepCallback& on_step = {});

/// Network output on the model's grid for an image already matching its input dims.
Tensor<float> predict(const UNet<float>& model, const ScalarVolume& image);

struct StripResult {
  BinaryMask mask;
  /// Predicted signed distance on the input grid (SDT head only).
  SdtVolume sdt;
};

/// Conforms the input to the model voxel size, centers it in the model's
/// input box (zero padding or cropping), runs the network, thresholds the
/// SDT (or takes the argmax of the Dice head) and maps the mask back onto the
/// input grid with nearest sampling.
StripResult strip(const UNet<float>& model, const ScalarVolume& input, double threshold = 0.0);

}  // namespace corticarve
