#include "corticarve/synthesis.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

namespace corticarve {

ExtracerebralLabeling fit_extracerebral_labels(const ScalarVolume& head, const LabelVolume& brain_labels, int k) {
  require_same_grid(head.grid, brain_labels.grid, "fit_extracerebral_labels");
  if (k < 1) throw Error(Errc::invalid_argument, "extra-cerebral label count must be >= 1");

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < head.size(); ++i) {
    if (head[i] != 0.0 && brain_labels[i] == 0) eligible.push_back(i);
  }
  if (eligible.empty()) throw Error(Errc::degenerate_input, "no extra-cerebral tissue");

  std::vector<double> sorted(eligible.size());
  std::transform(eligible.begin(), eligible.end(), sorted.begin(), [&](std::size_t i) { return head[i]; });
  std::sort(sorted.begin(), sorted.end());

  // Quantile thresholds give equal-count bins for distinct intensities.
  const std::size_t n = sorted.size();
  std::vector<double> thresholds;
  for (int j = 1; j < k; ++j) thresholds.push_back(sorted[(static_cast<std::size_t>(j) * n) / k]);

  ExtracerebralLabeling out;
  out.labels = brain_labels;
  const std::uint32_t first_id =
      (brain_labels.data.empty() ? 0u : *std::max_element(brain_labels.data.begin(), brain_labels.data.end())) + 1;
  for (int j = 0; j < k; ++j) out.new_label_ids.push_back(first_id + static_cast<std::uint32_t>(j));
  out.bin_counts.assign(k, 0);

  for (std::size_t i : eligible) {
    const double v = head[i];
    const auto bin = static_cast<std::size_t>(
        std::count_if(thresholds.begin(), thresholds.end(), [v](double t) { return v >= t; }));
    out.labels[i] = out.new_label_ids[bin];
    ++out.bin_counts[bin];
  }
  out.degenerate = std::any_of(out.bin_counts.begin(), out.bin_counts.end(), [](std::size_t c) { return c == 0; });
  return out;
}

BinaryMask merge_brain_labels(const LabelVolume& labels, const std::set<std::uint32_t>& brain_labels) {
  BinaryMask mask(labels.grid);
  for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = brain_labels.count(labels[i]) ? 1 : 0;
  return mask;
}

std::vector<std::uint32_t> unique_labels(const LabelVolume& labels) {
  std::vector<std::uint32_t> ids(labels.data);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

ScalarVolume render_gmm_image(const LabelVolume& labels, const SynthesisConfig& cfg, Rng& rng,
                              SynthesisDraws* draws) {
  if (labels.data.empty()) throw Error(Errc::invalid_argument, "empty label map");
  std::map<std::uint32_t, std::pair<double, double>> dist;
  for (std::uint32_t id : unique_labels(labels)) {
    const double mean = rng.uniform(cfg.label_intensity_mean.lo, cfg.label_intensity_mean.hi);
    const double sd = rng.uniform(cfg.label_intensity_sd.lo, cfg.label_intensity_sd.hi);
    dist[id] = {mean, sd};
    if (draws) {
      draws->label_mean[id] = mean;
      draws->label_sd[id] = sd;
    }
  }
  ScalarVolume img(labels.grid);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& [mean, sd] = dist[labels[i]];
    img[i] = rng.normal(mean, sd);
  }
  return img;
}

ScalarVolume apply_bias_field(const ScalarVolume& img, const ScalarVolume& coarse) {
  const Affine map = coarse.grid.affine.inverse() * img.grid.affine;
  ScalarVolume out(img.grid);
  const auto& d = img.grid.dims;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        const Vec3 p = detail::snap_to_nodes((map * Eigen::Vector4d(x, y, z, 1.0)).head<3>());
        out.at(x, y, z) = img.at(x, y, z) * std::exp(trilinear_sample(coarse, p));
      }
    }
  }
  return out;
}

ScalarVolume apply_bias_field(const ScalarVolume& img, const SynthesisConfig& cfg, Rng& rng,
                              SynthesisDraws* draws) {
  const double length = rng.uniform(cfg.bias_field_voxel_length_mm.lo, cfg.bias_field_voxel_length_mm.hi);
  const double sd = rng.uniform(cfg.bias_field_sd.lo, cfg.bias_field_sd.hi);
  if (draws) {
    draws->bias_voxel_length_mm = length;
    draws->bias_sd = sd;
  }
  ScalarVolume coarse(coarse_grid(img.grid, length));
  for (double& v : coarse.data) v = rng.normal(0.0, sd);
  return apply_bias_field(img, coarse);
}

ScalarVolume apply_gamma(const ScalarVolume& img, double g) {
  ScalarVolume out(img.grid);
  if (img.data.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0.0)) return out;
  const double exponent = std::exp(g);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = (img[i] - lo) / range;
    assert(v >= 0.0);
    out[i] = std::pow(v, exponent);
  }
  return out;
}

ScalarVolume crop_fov(const ScalarVolume& img, const CropSpec& crop) {
  ScalarVolume out = img;
  const auto& d = img.grid.dims;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        const int c[3] = {x, y, z};
        bool cropped = false;
        for (int a = 0; a < 3; ++a) cropped = cropped || c[a] < crop.low[a] || c[a] >= d[a] - crop.high[a];
        if (cropped) out.at(x, y, z) = 0.0;
      }
    }
  }
  return out;
}

ScalarVolume crop_fov(const ScalarVolume& img, const SynthesisConfig& cfg, Rng& rng, SynthesisDraws* draws) {
  CropSpec spec;
  for (int a = 0; a < 3; ++a) {
    const double total_mm = rng.uniform(cfg.fov_cropping_mm.lo, cfg.fov_cropping_mm.hi);
    const double low_mm = total_mm * rng.uniform(0.0, 1.0);
    if (draws) draws->crop_mm[a] = total_mm;
    const int n = img.grid.dims[a];
    int low = static_cast<int>(std::lround(low_mm / img.grid.spacing[a]));
    int high = static_cast<int>(std::lround((total_mm - low_mm) / img.grid.spacing[a]));
    // Keep at least one voxel of content per axis.
    low = std::min(low, n - 1);
    high = std::min(high, n - 1 - low);
    spec.low[a] = low;
    spec.high[a] = high;
  }
  return crop_fov(img, spec);
}

namespace {

/// Box-average by `factor` along one axis, then piecewise-linear interpolation
/// between coarse cell centers back onto the fine lattice.
void degrade_axis(ScalarVolume& img, int axis, int factor) {
  if (factor <= 1) return;
  const auto& d = img.grid.dims;
  const int n = d[axis];
  const int nc = (n + factor - 1) / factor;
  std::vector<double> centers(nc);
  for (int j = 0; j < nc; ++j) {
    const int begin = j * factor;
    const int end = std::min(begin + factor, n);
    centers[j] = begin + (end - begin - 1) / 2.0;
  }
  const std::size_t stride[3] = {1, static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[0]) * d[1]};
  const int a1 = (axis + 1) % 3;
  const int a2 = (axis + 2) % 3;
  std::vector<double> coarse(nc);
  for (int j2 = 0; j2 < d[a2]; ++j2) {
    for (int j1 = 0; j1 < d[a1]; ++j1) {
      const std::size_t base = j1 * stride[a1] + j2 * stride[a2];
      for (int j = 0; j < nc; ++j) {
        const int begin = j * factor;
        const int end = std::min(begin + factor, n);
        double sum = 0.0;
        for (int q = begin; q < end; ++q) sum += img[base + q * stride[axis]];
        coarse[j] = sum / (end - begin);
      }
      int j = 0;
      for (int q = 0; q < n; ++q) {
        double v;
        if (nc == 1 || q <= centers.front()) {
          v = coarse.front();
        } else if (q >= centers.back()) {
          v = coarse.back();
        } else {
          while (centers[j + 1] < q) ++j;
          const double t = (q - centers[j]) / (centers[j + 1] - centers[j]);
          v = coarse[j] * (1.0 - t) + coarse[j + 1] * t;
        }
        img[base + q * stride[axis]] = v;
      }
    }
  }
}

}  // namespace

ScalarVolume degrade_resolution(const ScalarVolume& img, const std::array<int, 3>& factors) {
  ScalarVolume out = img;
  for (int a = 0; a < 3; ++a) degrade_axis(out, a, factors[a]);
  return out;
}

ScalarVolume degrade_resolution(const ScalarVolume& img, const SynthesisConfig& cfg, Rng& rng,
                                SynthesisDraws* draws) {
  std::array<int, 3> factors{1, 1, 1};
  for (int a = 0; a < 3; ++a) {
    if (!cfg.downsample_factors.empty() && rng.bernoulli(cfg.downsample_probability)) {
      const auto pick = rng.integer(0, static_cast<long long>(cfg.downsample_factors.size()) - 1);
      factors[a] = cfg.downsample_factors[static_cast<std::size_t>(pick)];
    }
  }
  if (draws) draws->downsample_factor = factors;
  return degrade_resolution(img, factors);
}

SynthSample synthesize_sample(const LabelVolume& labels, const SynthesisConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::set<std::uint32_t> brain(cfg.brain_labels.begin(), cfg.brain_labels.end());
  if (std::none_of(labels.data.begin(), labels.data.end(), [&](std::uint32_t l) { return brain.count(l) > 0; })) {
    throw Error(Errc::invalid_argument, "label map contains no brain label");
  }

  Rng rng(seed);
  SynthSample s;
  s.seed = seed;

  const AffineSample affine = sample_affine(cfg, rng);
  s.draws.translation_mm = affine.translation_mm;
  s.draws.rotation_deg = affine.rotation_deg;
  s.draws.scale = affine.scale;
  const VelocityField svf = sample_velocity_field(labels.grid, cfg, rng, &s.draws);
  const DenseDeformation def = integrate_svf(svf, cfg.svf_steps, labels.grid);
  const LabelVolume warped = warp_volume(labels, affine, def, Interp::nearest);

  s.mask = merge_brain_labels(warped, brain);
  BandedSdt target = banded_signed_distance(s.mask, cfg.sdt_band_mm, cfg.sdt_background_weight);
  s.sdt = std::move(target.values);
  s.weights = std::move(target.weights);

  ScalarVolume img = render_gmm_image(warped, cfg, rng, &s.draws);
  img = apply_bias_field(img, cfg, rng, &s.draws);
  s.draws.gamma = rng.uniform(cfg.gamma_exponent.lo, cfg.gamma_exponent.hi);
  img = apply_gamma(img, s.draws.gamma);
  img = degrade_resolution(img, cfg, rng, &s.draws);
  img = crop_fov(img, cfg, rng, &s.draws);

  const auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
  if (*hi_it > *lo_it) {
    img = rescale_unit(img);
  } else {
    std::fill(img.data.begin(), img.data.end(), 0.0);
  }
  s.image = std::move(img);
  return s;
}

}  // namespace corticarve
