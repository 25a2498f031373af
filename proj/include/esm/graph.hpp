#pragma once

#include <Eigen/Dense>

#include <memory>
#include <vector>

namespace esm {

/// Undirected edge with endpoints i < j and nonnegative weight.
struct Edge {
  int i = 0;
  int j = 0;
  double w = 0.0;
};

enum class GraphFamily {
  Path,
  Cycle,
  Star,
  Wheel,
  Complete,
  CompleteBipartite,
  Scaled,
  Product,
  Custom,
};

/// Weighted undirected graph on vertices 0..K-1, immutable once built.
/// Graphs made by the named builders remember their family so spectra can
/// use closed forms; scalings and Cartesian products keep shared ownership
/// of their parts and stay cheap to copy.
class WeightedGraph {
 public:
  WeightedGraph() = default;

  int num_vertices() const { return k_; }
  const std::vector<Edge>& edges() const { return edges_; }
  GraphFamily family() const { return family_; }

  /// Uniform edge weight of a closed-form family.
  double family_weight() const { return family_weight_; }
  /// Part sizes of a CompleteBipartite graph, alpha <= beta.
  int bipartite_alpha() const { return alpha_; }
  int bipartite_beta() const { return beta_; }

  /// Factor of a Scaled graph.
  double scale_factor() const { return scale_; }
  /// Inner graph of a Scaled graph.
  const WeightedGraph& inner() const { return *left_; }
  /// Factors of a Product graph; vertex (i, j) maps to i * right.K + j.
  const WeightedGraph& left() const { return *left_; }
  const WeightedGraph& right() const { return *right_; }

 private:
  static WeightedGraph with_family(int k, std::vector<Edge> edges, GraphFamily family,
                                   double weight);

  int k_ = 1;
  std::vector<Edge> edges_;
  GraphFamily family_ = GraphFamily::Custom;
  double family_weight_ = 0.0;
  int alpha_ = 0;
  int beta_ = 0;
  double scale_ = 1.0;
  std::shared_ptr<const WeightedGraph> left_;
  std::shared_ptr<const WeightedGraph> right_;

  friend WeightedGraph build_path(int, double);
  friend WeightedGraph build_cycle(int, double);
  friend WeightedGraph build_star(int, double);
  friend WeightedGraph build_wheel(int, double);
  friend WeightedGraph build_complete(int, double);
  friend WeightedGraph build_complete_bipartite(int, int, double);
  friend WeightedGraph build_custom(int, std::vector<Edge>);
  friend WeightedGraph scale_weights(const WeightedGraph&, double);
  friend WeightedGraph cartesian_product(const WeightedGraph&, const WeightedGraph&);
};

WeightedGraph build_path(int num_vertices, double weight);
WeightedGraph build_cycle(int num_vertices, double weight);
/// Hub is vertex 0.
WeightedGraph build_star(int num_vertices, double weight);
/// Hub is vertex 0, ring is 1..K-1; needs K >= 4.
WeightedGraph build_wheel(int num_vertices, double weight);
WeightedGraph build_complete(int num_vertices, double weight);
/// Parts are vertices 0..alpha-1 and alpha..K-1; sizes are sorted so that
/// alpha <= beta.
WeightedGraph build_complete_bipartite(int alpha, int beta, double weight);
/// Arbitrary edge list; edges are normalized to i < j and must name each
/// pair at most once with nonnegative weight.
WeightedGraph build_custom(int num_vertices, std::vector<Edge> edges);

/// Same graph with every weight multiplied by alpha >= 0.
WeightedGraph scale_weights(const WeightedGraph& g, double alpha);
/// Cartesian product: vertex (i, j) -> i * b.K + j, edges replicate a across
/// copies of b and vice versa, so L = L_a (x) I + I (x) L_b.
WeightedGraph cartesian_product(const WeightedGraph& a, const WeightedGraph& b);

/// Dense K x K Laplacian, L = D - W.
Eigen::MatrixXd laplacian(const WeightedGraph& g);

/// True when the whole structure tree is made of closed-form families.
bool has_analytic_spectrum(const WeightedGraph& g);

}  // namespace esm
