#include "corticarve/nnet.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "corticarve/rng.hpp"

namespace corticarve {

std::string to_string(Head head) { return head == Head::sdt ? "sdt" : "dice"; }

Head head_from_string(const std::string& name) {
  if (name == "sdt") return Head::sdt;
  if (name == "dice") return Head::dice;
  throw Error(Errc::invalid_argument, "unknown head '" + name + "' (expected sdt or dice)");
}

UNetConfig UNetConfig::full_scale() {
  UNetConfig c;
  c.levels = 7;
  c.filters = {16, 32, 64, 64, 64, 64, 64};
  c.convs_per_level = 2;
  c.input_dims = {256, 256, 256};
  c.voxel_size_mm = 1.0;
  return c;
}

void UNetConfig::validate() const {
  if (levels < 1) throw Error(Errc::invalid_argument, "levels must be >= 1");
  if (static_cast<int>(filters.size()) != levels) {
    throw Error(Errc::invalid_argument, "filters list length must equal levels");
  }
  for (int f : filters) {
    if (f < 1) throw Error(Errc::invalid_argument, "filter counts must be >= 1");
  }
  if (convs_per_level < 1) throw Error(Errc::invalid_argument, "convs_per_level must be >= 1");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw Error(Errc::invalid_argument, "leaky slope must lie in (0, 1)");
  const int multiple = 1 << (levels - 1);
  for (int d : input_dims) {
    if (d < 1 || d % multiple != 0) {
      throw Error(Errc::invalid_argument, "input dims must be positive multiples of 2^(levels-1)");
    }
  }
  if (!(voxel_size_mm > 0.0)) throw Error(Errc::invalid_argument, "voxel_size_mm must be positive");
}

namespace layers {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Zero-padded layout (one voxel of padding per side). A 3x3x3 tap becomes a
/// constant shift of the flat padded index, so each tap is one GEMM against a
/// column window of the padded input.
struct PaddedLayout {
  long px, py, pz;
  long total;
  long margin;
  long columns;
  long offsets[27];

  explicit PaddedLayout(const Dims& d) : px(d[0] + 2), py(d[1] + 2), pz(d[2] + 2) {
    total = px * py * pz;
    margin = px * py + px + 1;
    columns = total - 2 * margin;
    int k = 0;
    for (int kz = -1; kz <= 1; ++kz) {
      for (int ky = -1; ky <= 1; ++ky) {
        for (int kx = -1; kx <= 1; ++kx) offsets[k++] = kz * px * py + ky * px + kx;
      }
    }
  }
  /// Column (relative to `margin`) of voxel (x, y, z).
  long column(int x, int y, int z) const { return (z + 1) * px * py + (y + 1) * px + (x + 1) - margin; }
};

template <class T>
RowMat<T> pad(const Tensor<T>& t, const PaddedLayout& lay) {
  RowMat<T> p = RowMat<T>::Zero(t.channels, lay.total);
  const auto& d = t.dims;
  for (int c = 0; c < t.channels; ++c) {
    const T* src = t.channel(c);
    T* dst = p.row(c).data();
    for (int z = 0; z < d[2]; ++z) {
      for (int y = 0; y < d[1]; ++y) {
        std::copy_n(src + static_cast<std::size_t>(d[0]) * (y + static_cast<std::size_t>(d[1]) * z), d[0],
                    dst + lay.column(0, y, z) + lay.margin);
      }
    }
  }
  return p;
}

}  // namespace

template <class T>
Tensor<T> conv3d_forward(const Tensor<T>& input, std::span<const T> weights, std::span<const T> bias,
                         int out_channels) {
  const int cin = input.channels;
  const std::size_t per_tap = static_cast<std::size_t>(out_channels) * cin;
  if (weights.size() != 27 * per_tap || bias.size() != static_cast<std::size_t>(out_channels)) {
    throw Error(Errc::invalid_argument, "conv3d: weight shape mismatch");
  }
  const PaddedLayout lay(input.dims);
  const RowMat<T> padded = pad(input, lay);
  RowMat<T> acc = RowMat<T>::Zero(out_channels, lay.columns);
  for (int k = 0; k < 27; ++k) {
    Eigen::Map<const RowMat<T>> w(weights.data() + k * per_tap, out_channels, cin);
    acc.noalias() += w * padded.middleCols(lay.margin + lay.offsets[k], lay.columns);
  }
  Tensor<T> out(out_channels, input.dims);
  const auto& d = input.dims;
  for (int c = 0; c < out_channels; ++c) {
    T* dst = out.channel(c);
    const T* row = acc.row(c).data();
    const T b = bias[c];
    for (int z = 0; z < d[2]; ++z) {
      for (int y = 0; y < d[1]; ++y) {
        const T* src = row + lay.column(0, y, z);
        T* line = dst + static_cast<std::size_t>(d[0]) * (y + static_cast<std::size_t>(d[1]) * z);
        for (int x = 0; x < d[0]; ++x) line[x] = src[x] + b;
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> conv3d_backward(const Tensor<T>& input, std::span<const T> weights, const Tensor<T>& grad_output,
                          std::span<T> grad_weights, std::span<T> grad_bias) {
  const int cin = input.channels;
  const int cout = grad_output.channels;
  const std::size_t per_tap = static_cast<std::size_t>(cout) * cin;
  if (weights.size() != 27 * per_tap || grad_weights.size() != weights.size() ||
      grad_bias.size() != static_cast<std::size_t>(cout) || grad_output.dims != input.dims) {
    throw Error(Errc::invalid_argument, "conv3d backward: shape mismatch");
  }
  const PaddedLayout lay(input.dims);
  const RowMat<T> padded = pad(input, lay);
  const auto& d = input.dims;

  RowMat<T> grad_cols = RowMat<T>::Zero(cout, lay.columns);
  for (int c = 0; c < cout; ++c) {
    const T* src = grad_output.channel(c);
    T* row = grad_cols.row(c).data();
    T sum = 0;
    for (int z = 0; z < d[2]; ++z) {
      for (int y = 0; y < d[1]; ++y) {
        const T* line = src + static_cast<std::size_t>(d[0]) * (y + static_cast<std::size_t>(d[1]) * z);
        T* dst = row + lay.column(0, y, z);
        for (int x = 0; x < d[0]; ++x) {
          dst[x] = line[x];
          sum += line[x];
        }
      }
    }
    grad_bias[c] += sum;
  }

  RowMat<T> grad_padded = RowMat<T>::Zero(cin, lay.total);
  for (int k = 0; k < 27; ++k) {
    const auto window = lay.margin + lay.offsets[k];
    Eigen::Map<const RowMat<T>> w(weights.data() + k * per_tap, cout, cin);
    Eigen::Map<RowMat<T>> gw(grad_weights.data() + k * per_tap, cout, cin);
    gw.noalias() += grad_cols * padded.middleCols(window, lay.columns).transpose();
    grad_padded.middleCols(window, lay.columns).noalias() += w.transpose() * grad_cols;
  }

  Tensor<T> grad_input(cin, d);
  for (int c = 0; c < cin; ++c) {
    const T* row = grad_padded.row(c).data() + lay.margin;
    T* dst = grad_input.channel(c);
    for (int z = 0; z < d[2]; ++z) {
      for (int y = 0; y < d[1]; ++y) {
        std::copy_n(row + lay.column(0, y, z), d[0],
                    dst + static_cast<std::size_t>(d[0]) * (y + static_cast<std::size_t>(d[1]) * z));
      }
    }
  }
  return grad_input;
}

template <class T>
Tensor<T> leaky_relu_forward(const Tensor<T>& input, T slope) {
  Tensor<T> out = input;
  for (T& v : out.data) v = v > T(0) ? v : slope * v;
  return out;
}

template <class T>
Tensor<T> leaky_relu_backward(const Tensor<T>& pre_activation, const Tensor<T>& grad_output, T slope) {
  Tensor<T> out = grad_output;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!(pre_activation.data[i] > T(0))) out.data[i] *= slope;
  }
  return out;
}

template <class T>
Tensor<T> maxpool2_forward(const Tensor<T>& input, std::vector<std::uint32_t>& argmax) {
  const auto& d = input.dims;
  for (int a = 0; a < 3; ++a) {
    if (d[a] % 2 != 0) throw Error(Errc::invalid_argument, "maxpool2: dims must be even");
  }
  const Dims od{d[0] / 2, d[1] / 2, d[2] / 2};
  Tensor<T> out(input.channels, od);
  argmax.assign(out.data.size(), 0);
  const std::size_t in_vox = input.voxels();
  std::size_t o = 0;
  for (int c = 0; c < input.channels; ++c) {
    const std::size_t base = c * in_vox;
    for (int z = 0; z < od[2]; ++z) {
      for (int y = 0; y < od[1]; ++y) {
        for (int x = 0; x < od[0]; ++x, ++o) {
          std::size_t best = 0;
          T best_v = -std::numeric_limits<T>::infinity();
          for (int dz = 0; dz < 2; ++dz) {
            for (int dy = 0; dy < 2; ++dy) {
              for (int dx = 0; dx < 2; ++dx) {
                const std::size_t i = base + (2 * x + dx) +
                                      static_cast<std::size_t>(d[0]) *
                                          ((2 * y + dy) + static_cast<std::size_t>(d[1]) * (2 * z + dz));
                if (input.data[i] > best_v) {
                  best_v = input.data[i];
                  best = i;
                }
              }
            }
          }
          out.data[o] = best_v;
          argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_output, const std::vector<std::uint32_t>& argmax,
                            const Dims& input_dims) {
  if (argmax.size() != grad_output.data.size()) throw Error(Errc::stale_cache, "maxpool2: argmax size mismatch");
  Tensor<T> grad(grad_output.channels, input_dims);
  for (std::size_t o = 0; o < argmax.size(); ++o) grad.data[argmax[o]] += grad_output.data[o];
  return grad;
}

template <class T>
Tensor<T> upsample2_forward(const Tensor<T>& input) {
  const auto& d = input.dims;
  const Dims od{d[0] * 2, d[1] * 2, d[2] * 2};
  Tensor<T> out(input.channels, od);
  for (int c = 0; c < input.channels; ++c) {
    const T* src = input.channel(c);
    T* dst = out.channel(c);
    for (int z = 0; z < od[2]; ++z) {
      for (int y = 0; y < od[1]; ++y) {
        const T* line = src + static_cast<std::size_t>(d[0]) * (y / 2 + static_cast<std::size_t>(d[1]) * (z / 2));
        T* o = dst + static_cast<std::size_t>(od[0]) * (y + static_cast<std::size_t>(od[1]) * z);
        for (int x = 0; x < od[0]; ++x) o[x] = line[x / 2];
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& grad_output) {
  const auto& od = grad_output.dims;
  const Dims d{od[0] / 2, od[1] / 2, od[2] / 2};
  Tensor<T> grad(grad_output.channels, d);
  for (int c = 0; c < grad_output.channels; ++c) {
    const T* src = grad_output.channel(c);
    T* dst = grad.channel(c);
    for (int z = 0; z < od[2]; ++z) {
      for (int y = 0; y < od[1]; ++y) {
        const T* line = src + static_cast<std::size_t>(od[0]) * (y + static_cast<std::size_t>(od[1]) * z);
        T* o = dst + static_cast<std::size_t>(d[0]) * (y / 2 + static_cast<std::size_t>(d[1]) * (z / 2));
        for (int x = 0; x < od[0]; ++x) o[x / 2] += line[x];
      }
    }
  }
  return grad;
}

template <class T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.dims != b.dims) throw Error(Errc::invalid_argument, "concat: dims mismatch");
  Tensor<T> out;
  out.channels = a.channels + b.channels;
  out.dims = a.dims;
  out.data.reserve(a.data.size() + b.data.size());
  out.data.insert(out.data.end(), a.data.begin(), a.data.end());
  out.data.insert(out.data.end(), b.data.begin(), b.data.end());
  return out;
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> concat_backward(const Tensor<T>& grad, int split) {
  const std::size_t vox = grad.voxels();
  Tensor<T> a, b;
  a.channels = split;
  b.channels = grad.channels - split;
  a.dims = b.dims = grad.dims;
  a.data.assign(grad.data.begin(), grad.data.begin() + split * vox);
  b.data.assign(grad.data.begin() + split * vox, grad.data.end());
  return {std::move(a), std::move(b)};
}

template <class T>
Tensor<T> softmax_forward(const Tensor<T>& logits) {
  Tensor<T> out(logits.channels, logits.dims);
  const std::size_t vox = logits.voxels();
  for (std::size_t i = 0; i < vox; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (int c = 0; c < logits.channels; ++c) mx = std::max(mx, logits.data[c * vox + i]);
    T sum = 0;
    for (int c = 0; c < logits.channels; ++c) {
      const T e = std::exp(logits.data[c * vox + i] - mx);
      out.data[c * vox + i] = e;
      sum += e;
    }
    for (int c = 0; c < logits.channels; ++c) out.data[c * vox + i] /= sum;
  }
  return out;
}

template <class T>
Tensor<T> softmax_backward(const Tensor<T>& probabilities, const Tensor<T>& grad_output) {
  Tensor<T> grad(probabilities.channels, probabilities.dims);
  const std::size_t vox = probabilities.voxels();
  for (std::size_t i = 0; i < vox; ++i) {
    T dot = 0;
    for (int c = 0; c < probabilities.channels; ++c) dot += probabilities.data[c * vox + i] * grad_output.data[c * vox + i];
    for (int c = 0; c < probabilities.channels; ++c) {
      const T p = probabilities.data[c * vox + i];
      grad.data[c * vox + i] = p * (grad_output.data[c * vox + i] - dot);
    }
  }
  return grad;
}

#define CORTICARVE_INSTANTIATE_LAYERS(T)                                                                          \
  template Tensor<T> conv3d_forward(const Tensor<T>&, std::span<const T>, std::span<const T>, int);              \
  template Tensor<T> conv3d_backward(const Tensor<T>&, std::span<const T>, const Tensor<T>&, std::span<T>,       \
                                     std::span<T>);                                                               \
  template Tensor<T> leaky_relu_forward(const Tensor<T>&, T);                                                     \
  template Tensor<T> leaky_relu_backward(const Tensor<T>&, const Tensor<T>&, T);                                  \
  template Tensor<T> maxpool2_forward(const Tensor<T>&, std::vector<std::uint32_t>&);                            \
  template Tensor<T> maxpool2_backward(const Tensor<T>&, const std::vector<std::uint32_t>&, const Dims&);        \
  template Tensor<T> upsample2_forward(const Tensor<T>&);                                                         \
  template Tensor<T> upsample2_backward(const Tensor<T>&);                                                        \
  template Tensor<T> concat(const Tensor<T>&, const Tensor<T>&);                                                  \
  template std::pair<Tensor<T>, Tensor<T>> concat_backward(const Tensor<T>&, int);                                \
  template Tensor<T> softmax_forward(const Tensor<T>&);                                                           \
  template Tensor<T> softmax_backward(const Tensor<T>&, const Tensor<T>&);

CORTICARVE_INSTANTIATE_LAYERS(float)
CORTICARVE_INSTANTIATE_LAYERS(double)
#undef CORTICARVE_INSTANTIATE_LAYERS

}  // namespace layers

template <class T>
UNet<T>::UNet(UNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const int levels = config_.levels;
  const int convs = config_.convs_per_level;
  const auto& f = config_.filters;
  std::size_t offset = 0;
  const auto add = [&](std::string name, int cin, int cout) {
    ConvLayerInfo info{std::move(name), cin, cout, offset, offset + 27u * cin * cout};
    offset = info.bias_offset + cout;
    layers_.push_back(std::move(info));
  };
  for (int l = 0; l < levels; ++l) {
    for (int c = 0; c < convs; ++c) {
      const int cin = c > 0 ? f[l] : (l == 0 ? 1 : f[l - 1]);
      add("enc" + std::to_string(l) + ".conv" + std::to_string(c), cin, f[l]);
    }
  }
  for (int l = levels - 2; l >= 0; --l) {
    for (int c = 0; c < convs; ++c) {
      const int cin = c > 0 ? f[l] : f[l + 1] + f[l];
      add("dec" + std::to_string(l) + ".conv" + std::to_string(c), cin, f[l]);
    }
  }
  add("head", f[0], config_.head == Head::sdt ? 1 : 2);

  params_.assign(offset, T(0));
  adam_m_.assign(offset, T(0));
  adam_v_.assign(offset, T(0));

  // He initialization scaled for the leaky slope; the linear head uses unit gain.
  Rng rng(seed);
  const double slope = config_.leaky_slope;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& info = layers_[i];
    const double fan_in = 27.0 * info.in_channels;
    const bool is_head = i + 1 == layers_.size();
    const double gain = is_head ? 1.0 : 2.0 / (1.0 + slope * slope);
    const double sd = std::sqrt(gain / fan_in);
    for (std::size_t w = info.weight_offset; w < info.bias_offset; ++w) params_[w] = static_cast<T>(rng.normal(0.0, sd));
  }
}

template <class T>
Tensor<T> UNet<T>::run_conv(std::size_t layer, const Tensor<T>& input) const {
  const auto& info = layers_[layer];
  if (input.channels != info.in_channels) throw Error(Errc::invalid_argument, "conv input channel mismatch");
  const std::span<const T> all(params_);
  return layers::conv3d_forward<T>(input, all.subspan(info.weight_offset, info.bias_offset - info.weight_offset),
                                   all.subspan(info.bias_offset, info.out_channels), info.out_channels);
}

template <class T>
Tensor<T> UNet<T>::forward(const Tensor<T>& input, Cache* cache) const {
  if (input.channels != 1 || input.dims != config_.input_dims) {
    throw Error(Errc::invalid_argument, "unet forward: input dims do not match the model configuration");
  }
  const int levels = config_.levels;
  const int convs = config_.convs_per_level;
  const T slope = static_cast<T>(config_.leaky_slope);
  if (cache) {
    *cache = Cache{};
    cache->owner = this;
    cache->version = version_;
    cache->conv_inputs.resize(layers_.size());
    cache->pre_activations.resize(layers_.size());
    cache->pool_argmax.resize(levels > 1 ? levels - 1 : 0);
  }

  std::size_t li = 0;
  const auto conv_act = [&](Tensor<T> h, bool activate) {
    Tensor<T> z = run_conv(li, h);
    if (cache) {
      cache->conv_inputs[li] = std::move(h);
      cache->pre_activations[li] = z;
    }
    ++li;
    return activate ? layers::leaky_relu_forward(z, slope) : z;
  };

  std::vector<Tensor<T>> skips(levels);
  Tensor<T> h = input;
  for (int l = 0; l < levels; ++l) {
    if (l > 0) {
      std::vector<std::uint32_t> argmax;
      h = layers::maxpool2_forward(h, argmax);
      if (cache) cache->pool_argmax[l - 1] = std::move(argmax);
    }
    if (cache) cache->level_dims.push_back(h.dims);
    for (int c = 0; c < convs; ++c) h = conv_act(std::move(h), true);
    if (l < levels - 1) skips[l] = h;
  }
  for (int l = levels - 2; l >= 0; --l) {
    h = layers::concat(layers::upsample2_forward(h), skips[l]);
    skips[l] = Tensor<T>{};
    for (int c = 0; c < convs; ++c) h = conv_act(std::move(h), true);
  }
  Tensor<T> out = conv_act(std::move(h), false);
  if (config_.head == Head::dice) out = layers::softmax_forward(out);
  if (cache) cache->output = out;
  return out;
}

template <class T>
std::vector<T> UNet<T>::backward(const Cache& cache, const Tensor<T>& grad_output) const {
  if (cache.owner != this || cache.version != version_ || cache.conv_inputs.size() != layers_.size()) {
    throw Error(Errc::stale_cache, "backward called with a cache from different weights");
  }
  if (grad_output.channels != cache.output.channels || grad_output.dims != cache.output.dims) {
    throw Error(Errc::invalid_argument, "backward: gradient shape does not match the output");
  }
  const int levels = config_.levels;
  const int convs = config_.convs_per_level;
  const T slope = static_cast<T>(config_.leaky_slope);
  std::vector<T> grads(params_.size(), T(0));
  const std::span<const T> all(params_);
  const std::span<T> gall(grads);

  const auto conv_back = [&](std::size_t layer, const Tensor<T>& g) {
    const auto& info = layers_[layer];
    const std::size_t wlen = info.bias_offset - info.weight_offset;
    return layers::conv3d_backward<T>(cache.conv_inputs[layer], all.subspan(info.weight_offset, wlen), g,
                                      gall.subspan(info.weight_offset, wlen),
                                      gall.subspan(info.bias_offset, info.out_channels));
  };
  const auto act_conv_back = [&](std::size_t layer, const Tensor<T>& g) {
    return conv_back(layer, layers::leaky_relu_backward(cache.pre_activations[layer], g, slope));
  };
  const auto enc_index = [&](int level, int c) { return static_cast<std::size_t>(level * convs + c); };
  const auto dec_index = [&](int level, int c) {
    return static_cast<std::size_t>(levels * convs + (levels - 2 - level) * convs + c);
  };

  Tensor<T> g = grad_output;
  if (config_.head == Head::dice) g = layers::softmax_backward(cache.output, g);
  g = conv_back(layers_.size() - 1, g);

  std::vector<Tensor<T>> skip_grads(levels);
  for (int l = 0; l <= levels - 2; ++l) {
    for (int c = convs - 1; c >= 0; --c) g = act_conv_back(dec_index(l, c), g);
    auto [up, skip] = layers::concat_backward(g, config_.filters[l + 1]);
    skip_grads[l] = std::move(skip);
    g = layers::upsample2_backward(up);
  }
  for (int l = levels - 1; l >= 0; --l) {
    if (l < levels - 1) {
      Tensor<T> pooled = layers::maxpool2_backward(g, cache.pool_argmax[l], cache.level_dims[l]);
      for (std::size_t i = 0; i < pooled.data.size(); ++i) pooled.data[i] += skip_grads[l].data[i];
      g = std::move(pooled);
    }
    for (int c = convs - 1; c >= 0; --c) g = act_conv_back(enc_index(l, c), g);
  }
  return grads;
}

template class UNet<float>;
template class UNet<double>;

template <class T>
void adam_step(UNet<T>& model, std::span<const T> grads, double lr, const AdamOptions& options) {
  if (grads.size() != model.parameter_count()) throw Error(Errc::invalid_argument, "adam: gradient length mismatch");
  for (T g : grads) {
    if (!std::isfinite(static_cast<double>(g))) throw Error(Errc::non_finite, "adam: non-finite gradient");
  }
  const std::int64_t t = model.adam_steps() + 1;
  const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(t));
  const T b1 = static_cast<T>(options.beta1);
  const T b2 = static_cast<T>(options.beta2);
  auto& m = model.adam_m();
  auto& v = model.adam_v();
  std::span<T> p = model.mutable_parameters();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T g = grads[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    p[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + options.epsilon));
  }
  model.set_adam_steps(t);
}

template void adam_step(UNet<float>&, std::span<const float>, double, const AdamOptions&);
template void adam_step(UNet<double>&, std::span<const double>, double, const AdamOptions&);

TrainState update_lr_on_plateau(TrainState state, double val_loss, std::int64_t patience, std::int64_t interval) {
  if (patience < 1) throw Error(Errc::invalid_argument, "patience must be >= 1");
  if (val_loss < state.best_val_loss) {
    state.best_val_loss = val_loss;
    state.steps_since_improvement = 0;
    return state;
  }
  state.steps_since_improvement += interval;
  if (state.steps_since_improvement >= patience) {
    state.lr *= 0.5;
    state.steps_since_improvement = 0;
  }
  return state;
}

template <class T>
Tensor<T> to_tensor(const ScalarVolume& vol) {
  Tensor<T> t(1, vol.grid.dims);
  std::transform(vol.data.begin(), vol.data.end(), t.data.begin(), [](double v) { return static_cast<T>(v); });
  return t;
}

template Tensor<float> to_tensor(const ScalarVolume&);
template Tensor<double> to_tensor(const ScalarVolume&);

}  // namespace corticarve
