#pragma once

// Directed acyclic graphs used as the known causal structure: generation,
// validation, misspecification and JSON interchange.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causalacq/errors.hpp"
#include "causalacq/rng.hpp"

namespace causalacq::graph {

/// Known causal DAG on nodes 0..p-1 (serialized 1-based). Parent lists are
/// kept sorted and duplicate free; `topo` is a topological order.
class Dag {
 public:
  Dag() = default;

  Dag(int p, std::vector<std::vector<int>> parents, std::vector<int> topo)
      : p_(p), parents_(std::move(parents)), topo_(std::move(topo)) {
    for (auto& pa : parents_) std::sort(pa.begin(), pa.end());
    validate();
  }

  /// Builds a Dag from parent sets alone, deriving a topological order with
  /// Kahn's algorithm (smallest ready index first). Throws on cycles.
  static Dag from_parents(int p, std::vector<std::vector<int>> parents) {
    if (p < 1) throw InputError("Dag: node count must be positive");
    if (static_cast<int>(parents.size()) != p) throw InputError("Dag: parents size != p");
    std::vector<int> indeg(p, 0);
    std::vector<std::vector<int>> kids(p);
    for (int i = 0; i < p; ++i) {
      for (int k : parents[i]) {
        if (k < 0 || k >= p) throw InputError("Dag: parent index out of range");
        kids[k].push_back(i);
        ++indeg[i];
      }
    }
    std::vector<int> ready, topo;
    for (int i = 0; i < p; ++i)
      if (indeg[i] == 0) ready.push_back(i);
    while (!ready.empty()) {
      auto it = std::min_element(ready.begin(), ready.end());
      int v = *it;
      ready.erase(it);
      topo.push_back(v);
      for (int c : kids[v])
        if (--indeg[c] == 0) ready.push_back(c);
    }
    if (static_cast<int>(topo.size()) != p) throw InputError("Dag: parent sets contain a cycle");
    return Dag(p, std::move(parents), std::move(topo));
  }

  int size() const noexcept { return p_; }
  const std::vector<int>& parents(int i) const { return parents_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::vector<int>>& all_parents() const noexcept { return parents_; }
  std::span<const int> topo() const noexcept { return topo_; }

  std::vector<std::vector<int>> children() const {
    std::vector<std::vector<int>> kids(static_cast<std::size_t>(p_));
    for (int i = 0; i < p_; ++i)
      for (int k : parents_[i]) kids[k].push_back(i);
    return kids;
  }

  bool has_edge(int from, int to) const {
    const auto& pa = parents(to);
    return std::binary_search(pa.begin(), pa.end(), from);
  }

  std::size_t edge_count() const {
    std::size_t e = 0;
    for (const auto& pa : parents_) e += pa.size();
    return e;
  }

  /// All edges (from, to), sorted lexicographically.
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < p_; ++i)
      for (int k : parents_[i]) out.emplace_back(k, i);
    std::sort(out.begin(), out.end());
    return out;
  }

  bool is_sink(int i) const {
    for (int j = 0; j < p_; ++j)
      if (has_edge(i, j)) return false;
    return true;
  }

  std::size_t max_in_degree() const {
    std::size_t d = 0;
    for (const auto& pa : parents_) d = std::max(d, pa.size());
    return d;
  }

  /// Position of each node in `topo`.
  std::vector<int> topo_position() const {
    std::vector<int> pos(static_cast<std::size_t>(p_));
    for (int r = 0; r < p_; ++r) pos[topo_[r]] = r;
    return pos;
  }

  friend bool operator==(const Dag&, const Dag&) = default;

 private:
  void validate() const {
    if (p_ < 1) throw InputError("Dag: node count must be positive");
    if (static_cast<int>(parents_.size()) != p_) throw InputError("Dag: parents size != p");
    if (static_cast<int>(topo_.size()) != p_) throw InputError("Dag: topo is not a permutation");
    std::vector<int> pos(static_cast<std::size_t>(p_), -1);
    for (int r = 0; r < p_; ++r) {
      int v = topo_[r];
      if (v < 0 || v >= p_ || pos[v] != -1) throw InputError("Dag: topo is not a permutation");
      pos[v] = r;
    }
    for (int i = 0; i < p_; ++i) {
      const auto& pa = parents_[i];
      for (std::size_t j = 0; j < pa.size(); ++j) {
        int k = pa[j];
        if (k < 0 || k >= p_) throw InputError("Dag: parent index out of range");
        if (k == i) throw InputError("Dag: self loop at node " + std::to_string(i + 1));
        if (j > 0 && pa[j - 1] == k) throw InputError("Dag: duplicate parent");
        if (pos[k] >= pos[i])
          throw InputError("Dag: edge " + std::to_string(k + 1) + "->" + std::to_string(i + 1) +
                           " violates the topological order");
      }
    }
  }

  int p_ = 0;
  std::vector<std::vector<int>> parents_;
  std::vector<int> topo_;
};

struct GraphKind {
  enum class Type { Complete, ErdosRenyi, Path };

  Type type = Type::Complete;
  double edge_prob = 0.0;  // ErdosRenyi only

  static GraphKind complete() { return {Type::Complete, 0.0}; }
  static GraphKind erdos_renyi(double q) { return {Type::ErdosRenyi, q}; }
  static GraphKind path() { return {Type::Path, 0.0}; }
};

/// Edge probability giving K expected edges on p nodes.
inline double erdos_renyi_prob_for_edges(int p, double expected_edges) {
  if (p < 2) throw InputError("erdos_renyi_prob_for_edges: p must be >= 2");
  double q = 2.0 * expected_edges / (static_cast<double>(p) * (p - 1));
  if (q < 0.0 || q > 1.0) throw InputError("erdos_renyi_prob_for_edges: infeasible edge count");
  return q;
}

namespace detail {

inline std::vector<int> fisher_yates(Rng& rng, int p) {
  std::vector<int> perm(static_cast<std::size_t>(p));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = p - 1; i > 0; --i) {
    auto j = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

template <typename T>
void shuffle(Rng& rng, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

}  // namespace detail

/// Samples a DAG whose skeleton follows `kind`, oriented by a uniformly drawn
/// node permutation. Pure function of (kind, p, seed).
inline Dag generate(const GraphKind& kind, int p, std::uint64_t seed) {
  if (p < 2) throw InputError("generate: p must be >= 2");
  if (kind.type == GraphKind::Type::ErdosRenyi && !(kind.edge_prob >= 0.0 && kind.edge_prob <= 1.0))
    throw InputError("generate: edge probability must lie in [0, 1]");

  Rng rng(seed);
  std::vector<int> perm = detail::fisher_yates(rng, p);
  std::vector<std::vector<int>> parents(static_cast<std::size_t>(p));
  switch (kind.type) {
    case GraphKind::Type::Complete:
      for (int b = 1; b < p; ++b)
        for (int a = 0; a < b; ++a) parents[perm[b]].push_back(perm[a]);
      break;
    case GraphKind::Type::ErdosRenyi:
      for (int b = 1; b < p; ++b)
        for (int a = 0; a < b; ++a)
          if (uniform01(rng) < kind.edge_prob) parents[perm[b]].push_back(perm[a]);
      break;
    case GraphKind::Type::Path:
      for (int b = 1; b < p; ++b) parents[perm[b]].push_back(perm[b - 1]);
      break;
  }
  return Dag(p, std::move(parents), std::move(perm));
}

struct Misspecification {
  enum class Kind { MissingEdges, ExcessiveEdges, ReversedEdges };

  Kind kind = Kind::MissingEdges;
  int count = 0;
};

inline std::string to_string(Misspecification::Kind k) {
  switch (k) {
    case Misspecification::Kind::MissingEdges: return "missing_edges";
    case Misspecification::Kind::ExcessiveEdges: return "excessive_edges";
    case Misspecification::Kind::ReversedEdges: return "reversed_edges";
  }
  return "?";
}

inline Misspecification::Kind parse_misspecification_kind(std::string_view s) {
  if (s == "missing_edges") return Misspecification::Kind::MissingEdges;
  if (s == "excessive_edges") return Misspecification::Kind::ExcessiveEdges;
  if (s == "reversed_edges") return Misspecification::Kind::ReversedEdges;
  throw InputError("unknown misspecification kind: " + std::string(s));
}

/// Structural Hamming distance: one per differing adjacency, one per reversal.
inline int structural_hamming_distance(const Dag& a, const Dag& b) {
  if (a.size() != b.size()) throw InputError("structural_hamming_distance: size mismatch");
  int d = 0;
  for (int i = 0; i < a.size(); ++i) {
    for (int j = i + 1; j < a.size(); ++j) {
      bool a_ij = a.has_edge(i, j), a_ji = a.has_edge(j, i);
      bool b_ij = b.has_edge(i, j), b_ji = b.has_edge(j, i);
      if (a_ij != b_ij || a_ji != b_ji) ++d;
    }
  }
  return d;
}

namespace detail {

inline std::optional<Dag> with_edges_reversed(const Dag& dag, std::span<const std::pair<int, int>> flips) {
  auto parents = dag.all_parents();
  for (auto [from, to] : flips) {
    auto& pa = parents[to];
    pa.erase(std::find(pa.begin(), pa.end(), from));
    parents[from].push_back(to);
  }
  try {
    return Dag::from_parents(dag.size(), std::move(parents));
  } catch (const InputError&) {
    return std::nullopt;
  }
}

// Depth-first search over candidate reversals in the given order; returns the
// first feasible set of `remaining` additional flips.
inline bool search_reversals(const Dag& dag, const std::vector<std::pair<int, int>>& cand, std::size_t start,
                             int remaining, std::vector<std::pair<int, int>>& chosen) {
  if (remaining == 0) return true;
  for (std::size_t c = start; c + static_cast<std::size_t>(remaining) <= cand.size(); ++c) {
    chosen.push_back(cand[c]);
    if (with_edges_reversed(dag, chosen) && search_reversals(dag, cand, c + 1, remaining - 1, chosen))
      return true;
    chosen.pop_back();
  }
  return false;
}

}  // namespace detail

/// Returns a DAG at structural Hamming distance exactly `spec.count` from
/// `dag`. Added edges follow dag's topological order; reversals that would
/// create a cycle are skipped in favour of other candidates.
inline Dag perturb(const Dag& dag, const Misspecification& spec, std::uint64_t seed) {
  if (spec.count < 0) throw InputError("perturb: negative count");
  if (spec.count == 0) return dag;
  Rng rng(seed);
  const int p = dag.size();
  auto count = static_cast<std::size_t>(spec.count);

  switch (spec.kind) {
    case Misspecification::Kind::MissingEdges: {
      auto edges = dag.edges();
      if (count > edges.size()) throw InputError("perturb: not enough edges to remove");
      detail::shuffle(rng, edges);
      auto parents = dag.all_parents();
      for (std::size_t e = 0; e < count; ++e) {
        auto [from, to] = edges[e];
        auto& pa = parents[to];
        pa.erase(std::find(pa.begin(), pa.end(), from));
      }
      return Dag(p, std::move(parents), std::vector<int>(dag.topo().begin(), dag.topo().end()));
    }
    case Misspecification::Kind::ExcessiveEdges: {
      auto pos = dag.topo_position();
      std::vector<std::pair<int, int>> absent;
      for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
          if (!dag.has_edge(i, j) && !dag.has_edge(j, i))
            absent.emplace_back(pos[i] < pos[j] ? std::pair{i, j} : std::pair{j, i});
      if (count > absent.size()) throw InputError("perturb: not enough non-edges to add");
      detail::shuffle(rng, absent);
      auto parents = dag.all_parents();
      for (std::size_t e = 0; e < count; ++e) parents[absent[e].second].push_back(absent[e].first);
      return Dag(p, std::move(parents), std::vector<int>(dag.topo().begin(), dag.topo().end()));
    }
    case Misspecification::Kind::ReversedEdges: {
      auto edges = dag.edges();
      if (count > edges.size()) throw InputError("perturb: not enough edges to reverse");
      detail::shuffle(rng, edges);
      std::vector<std::pair<int, int>> chosen;
      if (!detail::search_reversals(dag, edges, 0, spec.count, chosen))
        throw InputError("perturb: no acyclic set of " + std::to_string(spec.count) + " reversals exists");
      return *detail::with_edges_reversed(dag, chosen);
    }
  }
  throw InputError("perturb: unknown misspecification kind");
}

inline nlohmann::json to_json(const Dag& dag) {
  nlohmann::json parents = nlohmann::json::array();
  for (int i = 0; i < dag.size(); ++i) {
    nlohmann::json pa = nlohmann::json::array();
    for (int k : dag.parents(i)) pa.push_back(k + 1);
    parents.push_back(std::move(pa));
  }
  nlohmann::json topo = nlohmann::json::array();
  for (int v : dag.topo()) topo.push_back(v + 1);
  return {{"p", dag.size()}, {"parents", std::move(parents)}, {"topo", std::move(topo)}};
}

inline Dag dag_from_json(const nlohmann::json& j) {
  try {
    int p = j.at("p").get<int>();
    std::vector<std::vector<int>> parents;
    for (const auto& pa : j.at("parents")) {
      std::vector<int> row;
      for (const auto& k : pa) row.push_back(k.get<int>() - 1);
      parents.push_back(std::move(row));
    }
    std::vector<int> topo;
    for (const auto& v : j.at("topo")) topo.push_back(v.get<int>() - 1);
    return Dag(p, std::move(parents), std::move(topo));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("Dag JSON: ") + e.what());
  }
}

}  // namespace causalacq::graph
