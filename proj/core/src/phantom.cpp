#include "corticarve/phantom.hpp"

#include <cmath>
#include <vector>

#include "corticarve/rng.hpp"

namespace corticarve {

namespace {

struct Lobe {
  Vec3 direction;
  double amplitude;
};

}  // namespace

LabelVolume make_phantom(const PhantomConfig& cfg, std::uint64_t seed) {
  const Vec3 spacing = Vec3::Constant(cfg.spacing_mm);
  const Vec3 extent(cfg.dims[0] * cfg.spacing_mm, cfg.dims[1] * cfg.spacing_mm, cfg.dims[2] * cfg.spacing_mm);
  // World origin at the center of the field of view.
  const Vec3 origin = -0.5 * extent + 0.5 * spacing;
  LabelVolume labels(Grid::make(cfg.dims, spacing, origin), 0u);

  Rng rng(seed);
  const double radius = rng.uniform(cfg.brain_radius_min_mm, cfg.brain_radius_max_mm);
  const Vec3 axes(radius * rng.uniform(0.9, 1.1), radius * rng.uniform(0.9, 1.1), radius * rng.uniform(0.9, 1.1));
  const Vec3 center(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0));
  const double gap = rng.uniform(cfg.gap_min_mm, cfg.gap_max_mm);
  const double skull = rng.uniform(cfg.skull_min_mm, cfg.skull_max_mm);

  std::vector<Lobe> lobes(4);
  for (auto& lobe : lobes) {
    Vec3 d(rng.normal(0.0, 1.0), rng.normal(0.0, 1.0), rng.normal(0.0, 1.0));
    lobe.direction = d.normalized();
    lobe.amplitude = rng.uniform(-0.08, 0.08);
  }

  struct Blob {
    Vec3 center;
    double radius;
  };
  std::vector<Blob> blobs;
  for (int b = 0; b < cfg.blob_count; ++b) {
    Vec3 dir(rng.normal(0.0, 1.0), rng.normal(0.0, 1.0), rng.normal(0.0, 1.0));
    dir.normalize();
    const double r = rng.uniform(cfg.blob_radius_min_mm, cfg.blob_radius_max_mm);
    const double dist = axes.maxCoeff() * 1.1 + gap + rng.uniform(0.0, skull + r);
    blobs.push_back({center + dir * (dist + r * 0.5), r});
  }

  const Grid& g = labels.grid;
  for (int z = 0; z < cfg.dims[2]; ++z) {
    for (int y = 0; y < cfg.dims[1]; ++y) {
      for (int x = 0; x < cfg.dims[0]; ++x) {
        const Vec3 p = g.to_world(Vec3(x, y, z)) - center;
        const Vec3 u = p.cwiseQuotient(axes);
        const double rho = u.norm();
        double modulation = 1.0;
        if (rho > 0.0) {
          const Vec3 dir = u / rho;
          for (const auto& lobe : lobes) modulation += lobe.amplitude * dir.dot(lobe.direction) * dir.dot(lobe.direction);
        }
        // Radial distance (mm) from the modulated brain surface, approximately.
        const double surface = modulation;
        const double mean_axis = axes.mean();
        const double beyond = (rho - surface) * mean_axis;
        std::uint32_t label = 0;
        if (beyond <= 0.0) {
          label = 1;
        } else if (beyond > gap && beyond <= gap + skull) {
          label = 2;
        }
        if (label != 1) {
          for (std::size_t b = 0; b < blobs.size(); ++b) {
            if ((g.to_world(Vec3(x, y, z)) - blobs[b].center).norm() <= blobs[b].radius) {
              label = 3 + static_cast<std::uint32_t>(b);
            }
          }
        }
        labels.at(x, y, z) = label;
      }
    }
  }
  return labels;
}

}  // namespace corticarve
