#include "corticarve/train.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#if defined(__SSE3__)
#include <pmmintrin.h>
#endif

#include "corticarve/checkpoint.hpp"
#include "corticarve/losses.hpp"
#include "corticarve/rng.hpp"

namespace corticarve {

namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kValidationStream = 2;
constexpr std::uint64_t kPickStream = 3;

std::vector<double> to_double(const Tensor<float>& t) { return {t.data.begin(), t.data.end()}; }

// Saturated softmax outputs, and the Adam moments of the tiny gradients they
// pass back, drift into the subnormal range, where x86 arithmetic is about
// ten times slower. Training flushes subnormals to zero and restores the
// caller's mode on exit.
class FlushSubnormals {
 public:
#if defined(__SSE3__)
  FlushSubnormals() : saved_(_mm_getcsr()) {
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
  }
  ~FlushSubnormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

void check_label_maps(const std::vector<LabelVolume>& maps, const UNetConfig& net) {
  if (maps.empty()) throw Error(Errc::invalid_argument, "training needs at least one label map");
  for (const auto& m : maps) {
    if (m.grid.dims != net.input_dims) {
      throw Error(Errc::grid_mismatch, "label map dims must equal the network input dims");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 0) throw Error(Errc::invalid_argument, "steps must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(Errc::invalid_argument, "learning_rate must be positive");
  }
  if (val_interval < 0) throw Error(Errc::invalid_argument, "val_interval must be >= 0");
  if (val_interval > 0 && val_samples < 1) throw Error(Errc::invalid_argument, "val_samples must be >= 1");
  if (patience < 1) throw Error(Errc::invalid_argument, "patience must be >= 1");
  if (checkpoint_interval < 0) throw Error(Errc::invalid_argument, "checkpoint_interval must be >= 0");
  network.validate();
}

std::vector<std::uint64_t> validation_seeds(const TrainConfig& cfg) {
  std::vector<std::uint64_t> seeds;
  const std::uint64_t base = mix_seed(cfg.seed, kValidationStream);
  for (int i = 0; i < cfg.val_samples; ++i) seeds.push_back(mix_seed(base, static_cast<std::uint64_t>(i)));
  return seeds;
}

std::uint64_t training_seed(const TrainConfig& cfg, std::int64_t step) {
  return mix_seed(mix_seed(cfg.seed, kTrainStream), static_cast<std::uint64_t>(step));
}

LossResult sample_loss(Head head, const Tensor<float>& output, const SynthSample& sample) {
  const std::vector<double> out = to_double(output);
  if (head == Head::sdt) return sdt_loss(out, sample.sdt.data, sample.weights.data);
  return dice_loss(out, sample.mask.data);
}

double validation_loss(const UNet<float>& model, const std::vector<LabelVolume>& label_maps,
                       const SynthesisConfig& synth, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw Error(Errc::invalid_argument, "empty validation set");
  double total = 0.0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const LabelVolume& labels = label_maps[i % label_maps.size()];
    const SynthSample s = synthesize_sample(labels, synth, seeds[i]);
    total += sample_loss(model.config().head, model.forward(to_tensor<float>(s.image)), s).value;
  }
  return total / static_cast<double>(seeds.size());
}

TrainHistory train_loop(UNet<float>& model, const std::vector<LabelVolume>& label_maps, const SynthesisConfig& synth,
                        const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  synth.validate();
  if (!(model.config() == cfg.network)) {
    throw Error(Errc::invalid_argument, "model configuration differs from the training configuration");
  }
  check_label_maps(label_maps, model.config());
  const FlushSubnormals flush;

  TrainHistory history;
  history.state.lr = cfg.learning_rate;
  history.state.seed = cfg.seed;

  const std::vector<std::uint64_t> val_seeds = cfg.val_interval > 0 ? validation_seeds(cfg) : std::vector<std::uint64_t>{};
  const std::set<std::uint64_t> val_set(val_seeds.begin(), val_seeds.end());
  Rng pick(mix_seed(cfg.seed, kPickStream));

  const auto save = [&](const std::filesystem::path& path) {
    if (!path.empty()) save_checkpoint(model, path);
  };
  const auto validate_now = [&](std::int64_t step) {
    const double loss = validation_loss(model, label_maps, synth, val_seeds);
    if (!std::isfinite(loss)) {
      throw Error(Errc::non_finite, "validation loss is not finite at step " + std::to_string(step));
    }
    history.state = update_lr_on_plateau(history.state, loss, cfg.patience, step == 0 ? 0 : cfg.val_interval);
    history.validation.push_back({step, loss, history.state.lr});
  };

  if (cfg.val_interval > 0) validate_now(0);

  UNet<float>::Cache cache;
  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    std::uint64_t seed = training_seed(cfg, step);
    while (val_set.count(seed)) seed = mix_seed(seed, 0);
    const auto& labels = label_maps[static_cast<std::size_t>(
        pick.integer(0, static_cast<long long>(label_maps.size()) - 1))];
    const SynthSample sample = synthesize_sample(labels, synth, seed);

    model.forward(to_tensor<float>(sample.image), &cache);
    const LossResult loss = sample_loss(model.config().head, cache.output, sample);
    if (!std::isfinite(loss.value)) {
      std::filesystem::path dump = cfg.checkpoint_path;
      if (!dump.empty()) save(dump.replace_extension(".diverged.ckpt"));
      throw Error(Errc::non_finite, "training loss is not finite at step " + std::to_string(step) +
                                        " (sample seed " + std::to_string(seed) + ")");
    }
    Tensor<float> grad(cache.output.channels, cache.output.dims);
    std::transform(loss.gradient.begin(), loss.gradient.end(), grad.data.begin(),
                   [](double g) { return static_cast<float>(g); });
    const std::vector<float> grads = model.backward(cache, grad);
    adam_step<float>(model, grads, history.state.lr);

    history.state.step = step;
    history.train_loss.push_back(loss.value);
    if (cfg.val_interval > 0 && step % cfg.val_interval == 0) validate_now(step);
    if (cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0) save(cfg.checkpoint_path);
    if (on_step) on_step(step, loss.value, history.state);
  }
  save(cfg.checkpoint_path);
  return history;
}

Tensor<float> predict(const UNet<float>& model, const ScalarVolume& image) {
  return model.forward(to_tensor<float>(image));
}

StripResult strip(const UNet<float>& model, const ScalarVolume& input, double threshold) {
  input.grid.validate();
  const UNetConfig& net = model.config();
  const Conformed conformed = conform(input, net.voxel_size_mm);
  const ScalarVolume& src = conformed.volume;

  // Model box: the network's dims at the conformed spacing and orientation,
  // centered on the conformed field of view.
  Grid box;
  box.dims = net.input_dims;
  box.spacing = src.grid.spacing;
  box.affine = src.grid.affine;
  const Vec3 half((box.dims[0] - 1) / 2.0, (box.dims[1] - 1) / 2.0, (box.dims[2] - 1) / 2.0);
  box.affine.block<3, 1>(0, 3) = src.grid.center_world() - box.affine.block<3, 3>(0, 0) * half;

  ScalarVolume boxed(box);
  const Affine to_src = src.grid.affine.inverse() * box.affine;
  const auto inside = [](const Vec3& p, const Dims& d) {
    for (int a = 0; a < 3; ++a) {
      if (p[a] < -0.5 || p[a] > d[a] - 0.5) return false;
    }
    return true;
  };
  for (int z = 0; z < box.dims[2]; ++z) {
    for (int y = 0; y < box.dims[1]; ++y) {
      for (int x = 0; x < box.dims[0]; ++x) {
        const Vec3 p = detail::snap_to_nodes((to_src * Eigen::Vector4d(x, y, z, 1.0)).head<3>());
        boxed.at(x, y, z) = inside(p, src.grid.dims) ? trilinear_sample(src, p) : 0.0;
      }
    }
  }

  const Tensor<float> out = predict(model, boxed);
  BinaryMask box_mask(box);
  SdtVolume box_sdt(box);
  for (std::size_t i = 0; i < box_mask.size(); ++i) {
    if (net.head == Head::sdt) {
      box_sdt[i] = out.data[i];
      box_mask[i] = box_sdt[i] >= threshold ? 1 : 0;
    } else {
      box_mask[i] = out.channel(1)[i] > out.channel(0)[i] ? 1 : 0;
    }
  }

  StripResult result;
  result.mask = BinaryMask(input.grid);
  if (net.head == Head::sdt) result.sdt = SdtVolume(input.grid);
  const Affine to_box = box.affine.inverse() * input.grid.affine;
  const auto& d = input.grid.dims;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        const Vec3 p = detail::snap_to_nodes((to_box * Eigen::Vector4d(x, y, z, 1.0)).head<3>());
        const bool in_box = inside(p, box.dims);
        result.mask.at(x, y, z) = in_box ? nearest_sample(box_mask, p) : 0;
        if (net.head == Head::sdt) result.sdt.at(x, y, z) = trilinear_sample(box_sdt, p);
      }
    }
  }
  return result;
}

}  // namespace corticarve
