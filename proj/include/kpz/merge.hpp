#pragma once
#include <vector>
#include "kpz/estimate.hpp"

namespace kpz {

// Merge partial estimates from any whole-block partition of a sample range.
// Block accumulators are pooled, sorted by first stream id and refolded in
// that canonical order, then finished by the estimator's own finisher, so the
// result is bit-identical to the single-pass computation regardless of how
// samples were split across workers.  Requires equal (label, beta); throws on
// mismatch or overlapping blocks.
Estimate merge(const std::vector<Estimate>& parts);

}  // namespace kpz
