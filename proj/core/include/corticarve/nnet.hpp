#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "corticarve/volume.hpp"

namespace corticarve {

enum class Head { sdt, dice };

std::string to_string(Head head);
Head head_from_string(const std::string& name);

struct UNetConfig {
  int levels = 3;
  std::vector<int> filters{16, 32, 64};
  int convs_per_level = 2;
  double leaky_slope = 0.2;
  Head head = Head::sdt;
  Dims input_dims{32, 32, 32};
  /// Isotropic voxel size (mm) that inputs are conformed to before inference.
  double voxel_size_mm = 1.0;

  /// Seven levels, two convolutions each, filters [16, 32, 64, 64, 64, 64, 64],
  /// 256^3 input at 1 mm.
  static UNetConfig full_scale();

  void validate() const;
  bool operator==(const UNetConfig&) const = default;
};

/// Channel-major stack of volumes: value (c, x, y, z) lives at
/// c * voxels + x + nx * (y + ny * z).
template <class T>
struct Tensor {
  int channels = 0;
  Dims dims{0, 0, 0};
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, Dims d, T fill = T{}) : channels(c), dims(d), data(static_cast<std::size_t>(c) * voxels(d), fill) {}

  static std::size_t voxels(const Dims& d) {
    return static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1]) * static_cast<std::size_t>(d[2]);
  }
  std::size_t voxels() const { return voxels(dims); }
  T* channel(int c) { return data.data() + static_cast<std::size_t>(c) * voxels(); }
  const T* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * voxels(); }
  bool operator==(const Tensor&) const = default;
};

/// Individual layer kernels, exposed for gradient checking.
namespace layers {

/// 3x3x3 same-padded convolution. `weights` is laid out
/// [kz][ky][kx][out][in] (27 * out * in values), `bias` holds `out` values.
template <class T>
Tensor<T> conv3d_forward(const Tensor<T>& input, std::span<const T> weights, std::span<const T> bias, int out_channels);

/// Accumulates into grad_weights / grad_bias and returns d(loss)/d(input).
template <class T>
Tensor<T> conv3d_backward(const Tensor<T>& input, std::span<const T> weights, const Tensor<T>& grad_output,
                          std::span<T> grad_weights, std::span<T> grad_bias);

template <class T>
Tensor<T> leaky_relu_forward(const Tensor<T>& input, T slope);
template <class T>
Tensor<T> leaky_relu_backward(const Tensor<T>& pre_activation, const Tensor<T>& grad_output, T slope);

/// 2x2x2 max pooling; `argmax` receives the input index chosen for each output.
template <class T>
Tensor<T> maxpool2_forward(const Tensor<T>& input, std::vector<std::uint32_t>& argmax);
template <class T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_output, const std::vector<std::uint32_t>& argmax,
                            const Dims& input_dims);

/// Nearest-neighbour 2x upsampling.
template <class T>
Tensor<T> upsample2_forward(const Tensor<T>& input);
template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& grad_output);

template <class T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b);
/// Splits a gradient at channel `split` into the parts for concat's inputs.
template <class T>
std::pair<Tensor<T>, Tensor<T>> concat_backward(const Tensor<T>& grad, int split);

/// Softmax across channels at every voxel.
template <class T>
Tensor<T> softmax_forward(const Tensor<T>& logits);
template <class T>
Tensor<T> softmax_backward(const Tensor<T>& probabilities, const Tensor<T>& grad_output);

}  // namespace layers

struct ConvLayerInfo {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

/// 3D U-Net with max-pool encoder, nearest-upsampling decoder, concatenating
/// skip connections, leaky ReLU after every hidden convolution, and either a
/// linear single-channel head (SDT) or a two-channel softmax head (Dice).
template <class T>
class UNet {
 public:
  /// Everything the backward pass needs from one forward call.
  struct Cache {
    const UNet* owner = nullptr;
    std::uint64_t version = 0;
    /// Per convolution layer (in parameter order): its input and pre-activation.
    std::vector<Tensor<T>> conv_inputs;
    std::vector<Tensor<T>> pre_activations;
    std::vector<std::vector<std::uint32_t>> pool_argmax;
    std::vector<Dims> level_dims;
    Tensor<T> output;
  };

  explicit UNet(UNetConfig config, std::uint64_t seed = 0);

  const UNetConfig& config() const { return config_; }
  const std::vector<ConvLayerInfo>& layers() const { return layers_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<const T> parameters() const { return params_; }
  /// Mutable access invalidates outstanding caches.
  std::span<T> mutable_parameters() {
    ++version_;
    return params_;
  }

  /// Input must have one channel and the configured dims. Returns one channel
  /// (SDT head) or two softmax channels (Dice head).
  Tensor<T> forward(const Tensor<T>& input, Cache* cache = nullptr) const;

  /// Gradient of the loss w.r.t. every parameter (flat, parameter order).
  /// Throws Errc::stale_cache if the cache does not belong to the current weights.
  std::vector<T> backward(const Cache& cache, const Tensor<T>& grad_output) const;

  // Adam state.
  std::vector<T>& adam_m() { return adam_m_; }
  std::vector<T>& adam_v() { return adam_v_; }
  const std::vector<T>& adam_m() const { return adam_m_; }
  const std::vector<T>& adam_v() const { return adam_v_; }
  std::int64_t adam_steps() const { return adam_steps_; }
  void set_adam_steps(std::int64_t steps) { adam_steps_ = steps; }

 private:
  Tensor<T> run_conv(std::size_t layer, const Tensor<T>& input) const;

  UNetConfig config_;
  std::vector<ConvLayerInfo> layers_;
  std::vector<T> params_;
  std::vector<T> adam_m_;
  std::vector<T> adam_v_;
  std::int64_t adam_steps_ = 0;
  std::uint64_t version_ = 0;
};

extern template class UNet<float>;
extern template class UNet<double>;

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update. Throws Errc::non_finite (leaving the model
/// untouched) if any gradient is NaN or infinite.
template <class T>
void adam_step(UNet<T>& model, std::span<const T> grads, double lr, const AdamOptions& options = {});

struct TrainState {
  std::int64_t step = 0;
  double lr = 1e-4;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::int64_t steps_since_improvement = 0;
  std::uint64_t seed = 0;
};

/// Plateau schedule: an improvement resets the counter, otherwise the counter
/// advances by `interval` steps; once it reaches `patience` the learning rate
/// halves and the counter resets.
TrainState update_lr_on_plateau(TrainState state, double val_loss, std::int64_t patience = 20000,
                                 std::int64_t interval = 1);

/// Copies a volume into a single-channel tensor.
template <class T>
Tensor<T> to_tensor(const ScalarVolume& vol);

}  // namespace corticarve
