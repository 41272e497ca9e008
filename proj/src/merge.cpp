#include "kpz/merge.hpp"

#include <stdexcept>

#include "kpz/constants.hpp"

namespace kpz {

Estimate merge(const std::vector<Estimate>& parts) {
  if (parts.empty()) throw std::invalid_argument("merge: empty partial list");
  const Estimate& head = parts[0];
  for (const auto& p : parts) {
    if (p.label != head.label)
      throw std::invalid_argument("merge: label mismatch ('" + head.label +
                                  "' vs '" + p.label + "')");
    if (p.beta != head.beta)
      throw std::invalid_argument("merge: beta mismatch for label '" +
                                  head.label + "'");
    if (p.finisher != head.finisher)
      throw std::invalid_argument("merge: finisher mismatch for label '" +
                                  head.label + "'");
  }
  Estimate out;
  if (head.finisher == Estimate::Finisher::gamma_controls) {
    std::vector<BlockCoMoments<4>> pool;
    for (const auto& p : parts)
      pool.insert(pool.end(), p.cv_blocks.begin(), p.cv_blocks.end());
    out = finish_gamma_cv(std::move(pool), head.seed, head.beta, head.label);
    for (size_t i = 1; i < out.cv_blocks.size(); ++i)
      if (out.cv_blocks[i].first_stream == out.cv_blocks[i - 1].first_stream)
        throw std::invalid_argument("merge: overlapping sample blocks");
  } else {
    std::vector<BlockMoments> pool;
    for (const auto& p : parts)
      pool.insert(pool.end(), p.blocks.begin(), p.blocks.end());
    out = Estimate::from_blocks(std::move(pool), head.seed, head.beta, head.label);
    for (size_t i = 1; i < out.blocks.size(); ++i)
      if (out.blocks[i].first_stream == out.blocks[i - 1].first_stream)
        throw std::invalid_argument("merge: overlapping sample blocks");
  }
  return out;
}

}  // namespace kpz
