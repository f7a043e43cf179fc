#include "dtu/fusion.hpp"

#include <stdexcept>

namespace dtu {

void FusionConfig::validate() const {
  if (omega < 0.0 || omega > 1.0)
    throw std::invalid_argument("FusionConfig: omega must be in [0,1]");
  if (renorm_epsilon <= 0.0)
    throw std::invalid_argument("FusionConfig: renorm_epsilon must be positive");
}

ProbabilityMap fuse(const ProbabilityMap& p_tex, const ProbabilityMap& p_top,
                    const FusionConfig& cfg) {
  cfg.validate();
  if (p_tex.channels < 2)
    throw std::invalid_argument("fuse: texture map needs background + foreground channels");
  if (p_top.channels != 1)
    throw std::invalid_argument("fuse: topology map must be single-channel");
  if (p_tex.height != p_top.height || p_tex.width != p_top.width)
    throw std::invalid_argument("fuse: spatial shapes differ");

  const int c = p_tex.channels - 1;
  const double w = cfg.omega;
  ProbabilityMap out = ProbabilityMap::zeros(p_tex.height, p_tex.width, p_tex.channels);
  const std::size_t plane = static_cast<std::size_t>(p_tex.height) * p_tex.width;

  for (std::size_t i = 0; i < plane; ++i) {
    const double top = p_top.probs[i];
    double fg_mass = 0.0;
    for (int k = 1; k <= c; ++k)
      fg_mass += p_tex.probs[static_cast<std::size_t>(k) * plane + i];

    if (fg_mass < cfg.renorm_epsilon) {
      out.probs[i] = (1.0 - w) * (1.0 - top) + w;
      const double share = (1.0 - w) * top / static_cast<double>(c);
      for (int k = 1; k <= c; ++k)
        out.probs[static_cast<std::size_t>(k) * plane + i] = share;
      continue;
    }

    out.probs[i] = (1.0 - w) * (1.0 - top) + w * p_tex.probs[i];
    const double scale = ((1.0 - w) * top + w * fg_mass) / fg_mass;
    for (int k = 1; k <= c; ++k)
      out.probs[static_cast<std::size_t>(k) * plane + i] =
          scale * p_tex.probs[static_cast<std::size_t>(k) * plane + i];
  }
  return out;
}

}  // namespace dtu
