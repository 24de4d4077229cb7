#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snapture/model.hpp"

namespace oracle {

struct GroupError {
  std::string name;
  long size = 0;
  double rel_error = 0.0; ///< ||g_analytic - g_numeric|| / (||g_analytic|| + ||g_numeric||)
  double max_abs_diff = 0.0;
  long rechecked = 0;     ///< elements whose +-eps probes changed a max-pool selection
  long unresolved = 0;    ///< ... and still did so at the fallback step
};

/// Random continuous frames/snapshots, mixed lengths and gates.
snapture::Batch<double> tiny_batch(const snapture::ModelConfig &cfg, std::uint64_t seed);

/// Central differences on every element of every parameter, in train mode
/// with a fixed dropout seed. Max pooling is piecewise: a probe pair that
/// lands on different sides of a pooling switch measures the jump, not the
/// slope, so such elements are re-probed with fallback_eps.
std::vector<GroupError> gradcheck(snapture::SnaptureModel<double> &model,
                                  const snapture::Batch<double> &batch, double eps = 1e-3,
                                  double fallback_eps = 1e-6, std::uint64_t dropout_seed = 7);

/// The tiny config used by the acceptance check.
snapture::ModelConfig gradcheck_config();

} // namespace oracle
