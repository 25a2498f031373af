#include "esm/graph.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace esm {

namespace {

void check_vertices(int k, int minimum, const char* family) {
  if (k < minimum)
    throw std::invalid_argument(std::string(family) + " graph needs at least " +
                                std::to_string(minimum) + " vertices, got " + std::to_string(k));
}

void check_weight(double w) {
  if (!(w >= 0.0)) throw std::invalid_argument("edge weight must be nonnegative");
}

}  // namespace

WeightedGraph WeightedGraph::with_family(int k, std::vector<Edge> edges, GraphFamily family,
                                         double weight) {
  WeightedGraph g;
  g.k_ = k;
  g.edges_ = std::move(edges);
  g.family_ = family;
  g.family_weight_ = weight;
  return g;
}

WeightedGraph build_path(int num_vertices, double weight) {
  check_vertices(num_vertices, 1, "path");
  check_weight(weight);
  std::vector<Edge> edges;
  edges.reserve(num_vertices - 1);
  for (int i = 0; i + 1 < num_vertices; ++i) edges.push_back({i, i + 1, weight});
  return WeightedGraph::with_family(num_vertices, std::move(edges), GraphFamily::Path, weight);
}

WeightedGraph build_cycle(int num_vertices, double weight) {
  check_vertices(num_vertices, 3, "cycle");
  check_weight(weight);
  std::vector<Edge> edges;
  edges.reserve(num_vertices);
  for (int i = 0; i + 1 < num_vertices; ++i) edges.push_back({i, i + 1, weight});
  edges.push_back({0, num_vertices - 1, weight});
  return WeightedGraph::with_family(num_vertices, std::move(edges), GraphFamily::Cycle, weight);
}

WeightedGraph build_star(int num_vertices, double weight) {
  check_vertices(num_vertices, 2, "star");
  check_weight(weight);
  std::vector<Edge> edges;
  edges.reserve(num_vertices - 1);
  for (int i = 1; i < num_vertices; ++i) edges.push_back({0, i, weight});
  return WeightedGraph::with_family(num_vertices, std::move(edges), GraphFamily::Star, weight);
}

WeightedGraph build_wheel(int num_vertices, double weight) {
  check_vertices(num_vertices, 4, "wheel");
  check_weight(weight);
  std::vector<Edge> edges;
  edges.reserve(2 * (num_vertices - 1));
  for (int i = 1; i < num_vertices; ++i) edges.push_back({0, i, weight});
  for (int i = 1; i + 1 < num_vertices; ++i) edges.push_back({i, i + 1, weight});
  edges.push_back({1, num_vertices - 1, weight});
  return WeightedGraph::with_family(num_vertices, std::move(edges), GraphFamily::Wheel, weight);
}

WeightedGraph build_complete(int num_vertices, double weight) {
  check_vertices(num_vertices, 2, "complete");
  check_weight(weight);
  std::vector<Edge> edges;
  edges.reserve(num_vertices * (num_vertices - 1) / 2);
  for (int i = 0; i < num_vertices; ++i)
    for (int j = i + 1; j < num_vertices; ++j) edges.push_back({i, j, weight});
  return WeightedGraph::with_family(num_vertices, std::move(edges), GraphFamily::Complete, weight);
}

WeightedGraph build_complete_bipartite(int alpha, int beta, double weight) {
  if (alpha < 1 || beta < 1)
    throw std::invalid_argument("complete bipartite parts must be nonempty");
  check_weight(weight);
  if (alpha > beta) std::swap(alpha, beta);
  const int k = alpha + beta;
  std::vector<Edge> edges;
  edges.reserve(alpha * beta);
  for (int i = 0; i < alpha; ++i)
    for (int j = alpha; j < k; ++j) edges.push_back({i, j, weight});
  WeightedGraph g = WeightedGraph::with_family(k, std::move(edges), GraphFamily::CompleteBipartite, weight);
  g.alpha_ = alpha;
  g.beta_ = beta;
  return g;
}

WeightedGraph build_custom(int num_vertices, std::vector<Edge> edges) {
  check_vertices(num_vertices, 1, "custom");
  for (Edge& e : edges) {
    if (e.i > e.j) std::swap(e.i, e.j);
    if (e.i < 0 || e.j >= num_vertices)
      throw std::invalid_argument("edge endpoint out of range");
    if (e.i == e.j) throw std::invalid_argument("self-loops are not allowed");
    check_weight(e.w);
  }
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });
  for (std::size_t t = 1; t < edges.size(); ++t)
    if (edges[t - 1].i == edges[t].i && edges[t - 1].j == edges[t].j)
      throw std::invalid_argument("duplicate edge (" + std::to_string(edges[t].i) + "," +
                                  std::to_string(edges[t].j) + ")");
  WeightedGraph g;
  g.k_ = num_vertices;
  g.edges_ = std::move(edges);
  g.family_ = GraphFamily::Custom;
  return g;
}

WeightedGraph scale_weights(const WeightedGraph& g, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("scale factor must be nonnegative");
  WeightedGraph scaled;
  scaled.k_ = g.num_vertices();
  scaled.edges_ = g.edges();
  for (Edge& e : scaled.edges_) e.w *= alpha;
  scaled.family_ = GraphFamily::Scaled;
  scaled.scale_ = alpha;
  scaled.left_ = std::make_shared<WeightedGraph>(g);
  return scaled;
}

WeightedGraph cartesian_product(const WeightedGraph& a, const WeightedGraph& b) {
  const int ka = a.num_vertices();
  const int kb = b.num_vertices();
  WeightedGraph g;
  g.k_ = ka * kb;
  g.edges_.reserve(a.edges().size() * kb + b.edges().size() * ka);
  for (const Edge& e : a.edges())
    for (int j = 0; j < kb; ++j) g.edges_.push_back({e.i * kb + j, e.j * kb + j, e.w});
  for (const Edge& e : b.edges())
    for (int i = 0; i < ka; ++i) g.edges_.push_back({i * kb + e.i, i * kb + e.j, e.w});
  g.family_ = GraphFamily::Product;
  g.left_ = std::make_shared<WeightedGraph>(a);
  g.right_ = std::make_shared<WeightedGraph>(b);
  return g;
}

Eigen::MatrixXd laplacian(const WeightedGraph& g) {
  const int k = g.num_vertices();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(k, k);
  for (const Edge& e : g.edges()) {
    l(e.i, e.j) -= e.w;
    l(e.j, e.i) -= e.w;
    l(e.i, e.i) += e.w;
    l(e.j, e.j) += e.w;
  }
  return l;
}

bool has_analytic_spectrum(const WeightedGraph& g) {
  switch (g.family()) {
    case GraphFamily::Custom:
      return false;
    case GraphFamily::Scaled:
      return has_analytic_spectrum(g.inner());
    case GraphFamily::Product:
      return has_analytic_spectrum(g.left()) && has_analytic_spectrum(g.right());
    default:
      return true;
  }
}

}  // namespace esm
