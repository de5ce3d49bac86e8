#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "axislab/core_geometry.hpp"
#include "axislab/eval_metrics.hpp"
#include "axislab/head.hpp"

namespace axislab {

struct Pool {
  std::string name;
  PoolRole role = PoolRole::negative;
  EmbeddingMatrix emb;
  // Per-text Jacobian bundle for this pool when the cell head is not
  // evaluable in-process.
  std::optional<HeadModel> bundle;
};

/// One evaluation cell: a detector head plus the pools it is scored on.
/// The headline pair is (bias_pool negatives, positive_pool positives);
/// recall_pool is the held-out positive pool guarding recall (Cp1).
struct Cell {
  std::string cell_id;
  double tau = 0.0;
  HeadModel head;
  std::vector<Pool> pools;
  std::string positive_pool;
  std::string bias_pool;
  std::string recall_pool = "Cp1";

  const Pool& pool(const std::string& name) const {
    for (const auto& p : pools)
      if (p.name == name) return p;
    throw ValidationError("cell '" + cell_id + "' has no pool '" + name + "'");
  }

  const HeadModel& head_for(const Pool& p) const { return p.bundle ? *p.bundle : head; }

  bool evaluable() const {
    for (const auto& p : pools)
      if (!head_for(p).evaluable()) return false;
    return true;
  }

  Eigen::Index h() const { return pools.empty() ? 0 : pools.front().emb.h(); }

  void validate() const {
    detail::require(!pools.empty(), "cell '" + cell_id + "' has no pools");
    detail::require(std::isfinite(tau), "cell '" + cell_id + "': tau must be finite");
    for (const auto& p : pools) {
      p.emb.validate();
      detail::require(p.emb.h() == h(), "cell '" + cell_id + "': pools disagree on h");
      const auto& hm = head_for(p);
      detail::require(hm.h() == h(), "cell '" + cell_id + "': head dimension " + std::to_string(hm.h()) +
                                          " does not match embeddings (" + std::to_string(h()) + ")");
      if (hm.kind() == HeadKind::jacobian_bundle)
        detail::require(hm.bundle().rows.rows() == p.emb.n(), "cell '" + cell_id + "': bundle rows misaligned with pool '" + p.name + "'");
    }
    detail::require(pool(positive_pool).role == PoolRole::positive, "positive_pool must have the positive role");
    detail::require(pool(bias_pool).role == PoolRole::negative, "bias_pool must have the negative role");
  }
};

using PoolScores = std::map<std::string, Vector>;

inline PoolScores baseline_scores(const Cell& cell) {
  PoolScores out;
  for (const auto& p : cell.pools) out[p.name] = score_rows(cell.head_for(p), p.emb.data);
  return out;
}

/// Metric block for a set of per-pool scores at the cell threshold.
inline MetricBlock evaluate_block(const Cell& cell, const PoolScores& scores) {
  MetricBlock b;
  b.tau = cell.tau;
  for (const auto& p : cell.pools) {
    const auto& s = scores.at(p.name);
    b.pools[p.name] = {p.role, rate_at(s, cell.tau), static_cast<std::size_t>(s.size())};
  }
  b.auroc = auroc(scores.at(cell.positive_pool), scores.at(cell.bias_pool));
  b.fpr_at_tau = b.pools.at(cell.bias_pool).rate;
  b.tpr_at_tau = b.pools.at(cell.positive_pool).rate;
  return b;
}

}  // namespace axislab
