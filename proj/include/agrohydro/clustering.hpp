#pragma once

// Agglomerative hierarchical clustering of state trajectories with
// average linkage (mean pairwise Euclidean distance between members).
// Merging conceptually stops when the smallest inter-cluster average
// distance exceeds the threshold; implemented as a nearest-neighbor-chain
// pass (O(N^2) with a condensed distance matrix, exact for reducible
// linkages) followed by a dendrogram cut at the threshold, which yields
// the same partition because average-linkage merge heights are monotone.
//
// Ties break toward the smallest cluster slot; a slot is labeled by its
// smallest member index, so this matches the lexicographic
// (min index, min index) rule used by the brute-force reference in the
// test suite.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace agrohydro {

struct Dendrogram {
  struct Merge {
    int a, b;       // cluster slots merged (slot = smallest member index)
    double height;  // average-linkage distance at the merge
  };
  std::vector<Merge> merges;
};

namespace detail {

// Condensed strictly-upper-triangular index for i < j over n items.
inline std::size_t condensed_index(std::size_t n, std::size_t i, std::size_t j) {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

}  // namespace detail

/// Full average-linkage dendrogram of the rows of `rows` (one trajectory
/// per row).  Rows must be finite.
inline Dendrogram average_linkage_dendrogram(const Eigen::MatrixXd& rows) {
  const std::size_t n = static_cast<std::size_t>(rows.rows());
  if (n == 0) throw std::invalid_argument("clustering: no rows");
  if (!rows.allFinite())
    throw std::invalid_argument("clustering: non-finite snapshot entries");
  Dendrogram out;
  if (n == 1) return out;

  // pairwise Euclidean distances between rows, condensed
  std::vector<double> dist(n * (n - 1) / 2);
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    for (std::size_t j = i + 1; j < n; ++j)
      dist[detail::condensed_index(n, i, j)] =
          (rows.row(ii) - rows.row(static_cast<long long>(j))).norm();
  }

  std::vector<char> alive(n, 1);
  std::vector<int> size(n, 1);
  auto d = [&](std::size_t i, std::size_t j) -> double& {
    return i < j ? dist[detail::condensed_index(n, i, j)]
                 : dist[detail::condensed_index(n, j, i)];
  };

  std::vector<std::size_t> chain;
  chain.reserve(n);
  std::size_t remaining = n;
  std::size_t seed_scan = 0;
  while (remaining > 1) {
    if (chain.empty()) {
      while (!alive[seed_scan]) ++seed_scan;
      chain.push_back(seed_scan);
    }
    while (true) {
      const std::size_t c = chain.back();
      std::size_t best = n;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (!alive[j] || j == c) continue;
        const double dj = d(c, j);
        if (dj < best_d) {
          best_d = dj;
          best = j;
        }
      }
      // reciprocal nearest neighbors (ties merge with the predecessor,
      // which also rules out chain cycles)
      if (chain.size() >= 2 && d(c, chain[chain.size() - 2]) <= best_d) {
        const std::size_t a = chain[chain.size() - 2];
        const std::size_t lo = std::min(a, c), hi = std::max(a, c);
        out.merges.push_back(
            {static_cast<int>(lo), static_cast<int>(hi), d(a, c)});
        // Lance-Williams update, exact for average linkage
        for (std::size_t j = 0; j < n; ++j) {
          if (!alive[j] || j == lo || j == hi) continue;
          d(lo, j) = (size[lo] * d(lo, j) + size[hi] * d(hi, j)) /
                     static_cast<double>(size[lo] + size[hi]);
        }
        size[lo] += size[hi];
        alive[hi] = 0;
        --remaining;
        chain.pop_back();
        chain.pop_back();
        break;
      }
      chain.push_back(best);
    }
  }
  return out;
}

/// Cluster labels for the rows at a distance threshold: components joined
/// by merges of height <= threshold.  Labels are 0..r-1 in order of each
/// cluster's smallest member index.
inline std::vector<int> cut_dendrogram(const Dendrogram& dg, std::size_t n,
                                       double threshold) {
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (const auto& m : dg.merges) {
    if (m.height <= threshold) {
      const int ra = find(m.a), rb = find(m.b);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  std::vector<int> label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int r = find(static_cast<int>(i));
    if (label[r] < 0) label[r] = next++;
    label[i] = label[r];
  }
  return label;
}

}  // namespace agrohydro
