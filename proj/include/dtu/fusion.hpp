#pragma once

#include "dtu/core.hpp"

namespace dtu {

struct FusionConfig {
  double omega = 0.5;           // confidence in the texture prediction
  double renorm_epsilon = 1e-8;  // guard for vanishing foreground mass

  void validate() const;
};

// Soft fusion of the texture distribution and the topology foreground
// probability. Per pixel, with S = sum of foreground texture channels:
//   p_final[0] = (1-w)(1-p_top) + w * p_tex[0]
//   p_final[i] = ((1-w) p_top + w S) / S * p_tex[i]      for i >= 1
// When S < renorm_epsilon the foreground mass (1-w) p_top is split uniformly
// over the c foreground classes and p_final[0] = (1-w)(1-p_top) + w.
ProbabilityMap fuse(const ProbabilityMap& p_tex, const ProbabilityMap& p_top,
                    const FusionConfig& cfg);

}  // namespace dtu
