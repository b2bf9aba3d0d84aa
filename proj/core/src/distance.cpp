#include "corticarve/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace corticarve {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// 1D squared distance transform of sampled function f on a lattice of step
/// `h`: out[q] = min_p (h (q - p))^2 + f[p]. Infinite sites are skipped.
class EnvelopePass {
 public:
  void run(const double* f, double* out, int n, double h) {
    site_.resize(n);
    bound_.resize(n + 1);
    int k = -1;
    for (int q = 0; q < n; ++q) {
      if (f[q] == kInf) continue;
      if (k < 0) {
        k = 0;
        site_[0] = q;
        bound_[0] = -kInf;
        bound_[1] = kInf;
        continue;
      }
      const double fq = f[q] + (q * h) * (q * h);
      double s = 0.0;
      while (true) {
        const int p = site_[k];
        s = (fq - (f[p] + (p * h) * (p * h))) / (2.0 * h * (q - p));
        if (s <= bound_[k]) {
          --k;
          continue;
        }
        break;
      }
      ++k;
      site_[k] = q;
      bound_[k] = s;
      bound_[k + 1] = kInf;
    }
    if (k < 0) {
      std::fill(out, out + n, kInf);
      return;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (bound_[k + 1] < q * h) ++k;
      const double dq = h * (q - site_[k]);
      out[q] = dq * dq + f[site_[k]];
    }
  }

 private:
  std::vector<int> site_;
  std::vector<double> bound_;
};

void require_boundary(const BinaryMask& mask) {
  const std::size_t n = count_true(mask);
  if (n == 0 || n == mask.size()) throw Error(Errc::no_boundary, "no boundary: mask is all-true or all-false");
}

}  // namespace

ScalarVolume squared_edt(const BinaryMask& mask) {
  const Grid& g = mask.grid;
  const auto& d = g.dims;
  ScalarVolume out(g);
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 0.0 : kInf;

  EnvelopePass pass;
  const int longest = std::max({d[0], d[1], d[2]});
  std::vector<double> line(longest), result(longest);
  const std::size_t stride[3] = {1, static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[0]) * d[1]};

  for (int axis = 0; axis < 3; ++axis) {
    const int n = d[axis];
    const int a1 = (axis + 1) % 3;
    const int a2 = (axis + 2) % 3;
    for (int j = 0; j < d[a2]; ++j) {
      for (int i = 0; i < d[a1]; ++i) {
        const std::size_t base = i * stride[a1] + j * stride[a2];
        for (int q = 0; q < n; ++q) line[q] = out[base + q * stride[axis]];
        pass.run(line.data(), result.data(), n, g.spacing[axis]);
        for (int q = 0; q < n; ++q) out[base + q * stride[axis]] = result[q];
      }
    }
  }
  return out;
}

ScalarVolume exact_edt(const BinaryMask& mask) {
  require_boundary(mask);
  ScalarVolume out = squared_edt(mask);
  for (double& v : out.data) v = std::sqrt(v);
  return out;
}

SdtVolume signed_distance_transform(const BinaryMask& mask) {
  require_boundary(mask);
  BinaryMask outside(mask.grid);
  for (std::size_t i = 0; i < mask.size(); ++i) outside[i] = mask[i] ? 0 : 1;
  const ScalarVolume to_inside = squared_edt(mask);
  const ScalarVolume to_outside = squared_edt(outside);
  SdtVolume sdt(mask.grid);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    sdt[i] = mask[i] ? std::sqrt(to_outside[i]) : -std::sqrt(to_inside[i]);
  }
  return sdt;
}

BandedSdt band_target(const SdtVolume& sdt, double band_mm, double background_weight) {
  if (!(band_mm > 0.0)) throw Error(Errc::invalid_argument, "band must be positive");
  BandedSdt out{SdtVolume(sdt.grid), ScalarVolume(sdt.grid, 1.0)};
  for (std::size_t i = 0; i < sdt.size(); ++i) {
    const double v = sdt[i];
    out.values[i] = std::clamp(v, -band_mm, band_mm);
    if (std::abs(v) > band_mm) out.weights[i] = background_weight;
  }
  return out;
}

BandedSdt banded_signed_distance(const BinaryMask& mask, double band_mm, double background_weight) {
  const std::size_t n = count_true(mask);
  if (n == 0 || n == mask.size()) {
    const double value = n == 0 ? -band_mm : band_mm;
    return {SdtVolume(mask.grid, value), ScalarVolume(mask.grid, background_weight)};
  }
  return band_target(signed_distance_transform(mask), band_mm, background_weight);
}

BinaryMask mask_from_sdt(const SdtVolume& sdt, double threshold) {
  BinaryMask mask(sdt.grid);
  for (std::size_t i = 0; i < sdt.size(); ++i) mask[i] = sdt[i] >= threshold ? 1 : 0;
  return mask;
}

std::vector<std::size_t> surface_voxels(const BinaryMask& mask) {
  const Grid& g = mask.grid;
  const auto& d = g.dims;
  std::vector<std::size_t> out;
  const auto is_true = [&](int x, int y, int z) { return g.contains(x, y, z) && mask.at(x, y, z) != 0; };
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        if (!mask.at(x, y, z)) continue;
        if (!is_true(x - 1, y, z) || !is_true(x + 1, y, z) || !is_true(x, y - 1, z) || !is_true(x, y + 1, z) ||
            !is_true(x, y, z - 1) || !is_true(x, y, z + 1)) {
          out.push_back(g.index(x, y, z));
        }
      }
    }
  }
  if (out.empty()) throw Error(Errc::no_boundary, "mask has no surface voxels");
  return out;
}

}  // namespace corticarve
