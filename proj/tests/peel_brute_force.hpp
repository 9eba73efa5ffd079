// Test-only oracles for the core-finding machinery, independent of the
// library's peeling implementation: exhaustive deletion-order search on
// small instances and a rejection sampler for random small inputs.
#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "fluidmc/hypergraph.hpp"

namespace brute {

inline std::uint32_t alive_mask(const fluidmc::hg::HypergraphInstance& h) {
  std::uint32_t mask = 0;
  for (int e = 0; e < h.edge_count(); ++e)
    if (!h.edge_vertices[e].empty()) mask |= 1u << e;
  return mask;
}

// every deletion order of the peeling algorithm, by depth-first search over
// alive-edge masks with memoization; collects the terminal masks
inline void all_peel_outcomes(const fluidmc::hg::HypergraphInstance& h, int k,
                              std::uint32_t mask,
                              std::set<std::uint32_t>& visited,
                              std::set<std::uint32_t>& terminal) {
  if (visited.count(mask)) return;
  visited.insert(mask);
  std::vector<int> degree(h.vertex_count(), 0);
  for (int e = 0; e < h.edge_count(); ++e)
    if (mask & (1u << e))
      for (int u : h.edge_vertices[e]) ++degree[u];
  bool any_light = false;
  for (int v = 0; v < h.vertex_count(); ++v) {
    if (degree[v] == 0 || degree[v] >= k) continue;
    any_light = true;
    std::uint32_t next = mask;
    for (int e : h.vertex_edges[v])
      if (mask & (1u << e)) next &= ~(1u << e);
    all_peel_outcomes(h, k, next, visited, terminal);
  }
  if (!any_light) terminal.insert(mask);
}

// random instance with at most 12 incidences; resamples infeasible degree and
// weight sequences
inline fluidmc::hg::GenerateResult random_small_instance(fluidmc::Rng& rng) {
  using fluidmc::hg::FrequencyVectors;
  for (;;) {
    const int edges = 1 + static_cast<int>(rng.bounded(6));
    std::vector<int> weights(edges);
    int total = 0;
    for (auto& w : weights) {
      w = 1 + static_cast<int>(rng.bounded(3));
      total += w;
    }
    if (total > 12) continue;
    std::vector<int> degrees;
    int left = total;
    while (left > 0) {
      const int d =
          1 + static_cast<int>(rng.bounded(std::min<std::uint64_t>(3, left)));
      degrees.push_back(d);
      left -= d;
    }
    const int max_w = *std::max_element(weights.begin(), weights.end());
    if (max_w > static_cast<int>(degrees.size())) continue;

    const int lmax =
        std::max(*std::max_element(degrees.begin(), degrees.end()), max_w);
    std::vector<double> p(lmax + 1, 0.0), q(lmax + 1, 0.0);
    for (int d : degrees) p[d] += 1.0;
    for (int w : weights) q[w] += 1.0;
    try {
      const auto freq = FrequencyVectors::create(p, q);
      return fluidmc::hg::generate(freq, 1, rng.next_u64(), 0, 300);
    } catch (const fluidmc::ModelError&) {
      continue;  // infeasible sequence, resample
    }
  }
}

}  // namespace brute
