#include "quadslam/slam/pose_graph.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <queue>

namespace quadslam::slam {

int PoseGraph::add_node(const Pose2& pose, const LaserScan& scan) {
  const int id = next_id_++;
  if (nodes_.empty()) anchor_ = id;
  nodes_.push_back({id, pose, scan});
  return id;
}

void PoseGraph::add_edge(const PoseGraphEdge& e) {
  if (e.from == e.to) throw GraphError("edge endpoints must differ");
  if (!index_of(e.from) || !index_of(e.to)) throw GraphError("edge references a missing node");
  if (!e.information.isApprox(e.information.transpose()))
    throw GraphError("information matrix must be symmetric");
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(e.information);
  if (eig.eigenvalues().minCoeff() <= 0.0) throw GraphError("information matrix must be positive definite");
  edges_.push_back(e);
}

std::optional<std::size_t> PoseGraph::index_of(int id) const {
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                                   [](const PoseGraphNode& n, int v) { return n.id < v; });
  if (it == nodes_.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - nodes_.begin());
}

const PoseGraphNode& PoseGraph::node(int id) const {
  const auto i = index_of(id);
  if (!i) throw GraphError("no node with id " + std::to_string(id));
  return nodes_[*i];
}

void PoseGraph::set_pose(int id, const Pose2& p) {
  const auto i = index_of(id);
  if (!i) throw GraphError("no node with id " + std::to_string(id));
  nodes_[*i].pose = p;
}

void PoseGraph::restore(std::vector<PoseGraphNode> nodes, std::vector<PoseGraphEdge> edges, int anchor,
                        int next_id) {
  nodes_ = std::move(nodes);
  edges_ = std::move(edges);
  anchor_ = anchor;
  next_id_ = next_id;
}

Eigen::Vector3d edge_residual(const Pose2& from, const Pose2& to, const Pose2& z) {
  const double c = std::cos(from.theta), s = std::sin(from.theta);
  const double dx = to.x - from.x, dy = to.y - from.y;
  return {c * dx + s * dy - z.x, -s * dx + c * dy - z.y, wrap_angle(to.theta - from.theta - z.theta)};
}

EdgeLinearization linearize_edge(const Pose2& from, const Pose2& to, const Pose2& z) {
  const double c = std::cos(from.theta), s = std::sin(from.theta);
  const double dx = to.x - from.x, dy = to.y - from.y;
  EdgeLinearization l;
  l.residual = edge_residual(from, to, z);
  l.a << -c, -s, -s * dx + c * dy,  //
      s, -c, -c * dx - s * dy,      //
      0, 0, -1;
  l.b << c, s, 0,  //
      -s, c, 0,    //
      0, 0, 1;
  return l;
}

double chi2(const PoseGraph& g) {
  double total = 0.0;
  for (const auto& e : g.edges()) {
    const auto r = edge_residual(g.node(e.from).pose, g.node(e.to).pose, e.measurement);
    total += r.dot(e.information * r);
  }
  return total;
}

bool is_connected(const PoseGraph& g) {
  if (g.empty()) return true;
  const std::size_t n = g.nodes().size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& e : g.edges()) {
    const auto a = *g.index_of(e.from), b = *g.index_of(e.to);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> q;
  q.push(*g.index_of(g.anchor()));
  seen[q.front()] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (auto v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
  }
  return count == n;
}

namespace {

struct NormalEquations {
  Eigen::SparseMatrix<double> h;
  Eigen::VectorXd b;
};

// Variable block of node index i, or -1 for the anchor.
NormalEquations build(const PoseGraph& g, const std::vector<int>& block) {
  const auto n = static_cast<Eigen::Index>(3 * (g.nodes().size() - 1));
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (const auto& e : g.edges()) {
    const auto ia = *g.index_of(e.from), ib = *g.index_of(e.to);
    const auto l = linearize_edge(g.nodes()[ia].pose, g.nodes()[ib].pose, e.measurement);
    const int blocks[2] = {block[ia], block[ib]};
    const Eigen::Matrix3d* jac[2] = {&l.a, &l.b};
    for (int u = 0; u < 2; ++u) {
      if (blocks[u] < 0) continue;
      const Eigen::Matrix3d jt_omega = jac[u]->transpose() * e.information;
      b.segment<3>(3 * blocks[u]) += jt_omega * l.residual;
      for (int v = 0; v < 2; ++v) {
        if (blocks[v] < 0) continue;
        const Eigen::Matrix3d hb = jt_omega * *jac[v];
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) trip.emplace_back(3 * blocks[u] + r, 3 * blocks[v] + c, hb(r, c));
      }
    }
  }
  NormalEquations ne{Eigen::SparseMatrix<double>(n, n), std::move(b)};
  ne.h.setFromTriplets(trip.begin(), trip.end());
  return ne;
}

std::vector<Pose2> stepped(const PoseGraph& g, const std::vector<int>& block, const Eigen::VectorXd& dx) {
  std::vector<Pose2> out;
  out.reserve(g.nodes().size());
  for (std::size_t i = 0; i < g.nodes().size(); ++i) {
    Pose2 p = g.nodes()[i].pose;
    if (block[i] >= 0) {
      const auto k = 3 * block[i];
      p = {p.x + dx(k), p.y + dx(k + 1), wrap_angle(p.theta + dx(k + 2))};
    }
    out.push_back(p);
  }
  return out;
}

double chi2_with(const PoseGraph& g, const std::vector<Pose2>& poses) {
  double total = 0.0;
  for (const auto& e : g.edges()) {
    const auto r = edge_residual(poses[*g.index_of(e.from)], poses[*g.index_of(e.to)], e.measurement);
    total += r.dot(e.information * r);
  }
  return total;
}

}  // namespace

OptimizeResult optimize(PoseGraph& g, const OptimizerConfig& cfg) {
  OptimizeResult res;
  if (g.empty()) return res;
  if (!is_connected(g)) throw GraphError("pose graph is not connected to the anchor");
  res.initial_chi2 = res.final_chi2 = chi2(g);
  if (g.nodes().size() < 2) {
    res.converged = true;
    return res;
  }
  std::vector<int> block(g.nodes().size(), -1);
  int next = 0;
  const auto anchor = *g.index_of(g.anchor());
  for (std::size_t i = 0; i < block.size(); ++i)
    if (i != anchor) block[i] = next++;

  double current = res.initial_chi2;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (current == 0.0) {
      res.converged = true;
      break;
    }
    const auto ne = build(g, block);
    double lambda = 0.0;
    bool accepted = false, solved_any = false;
    std::vector<Pose2> candidate;
    double cand_chi2 = current;
    const double scale = std::max(1e-9, ne.h.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::SparseMatrix<double> h = ne.h;
      if (lambda > 0.0)
        for (Eigen::Index k = 0; k < h.rows(); ++k) h.coeffRef(k, k) += lambda * scale;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(h);
      if (solver.info() == Eigen::Success) {
        const Eigen::VectorXd dx = solver.solve(-ne.b);
        if (solver.info() == Eigen::Success && dx.allFinite()) {
          solved_any = true;
          candidate = stepped(g, block, dx);
          cand_chi2 = chi2_with(g, candidate);
          if (cand_chi2 < current) {
            accepted = true;
            break;
          }
        }
      }
      lambda = lambda == 0.0 ? 1e-6 : lambda * 10.0;
    }
    if (!solved_any) throw GraphError("normal equations are singular");
    if (!accepted) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < candidate.size(); ++i)
      if (block[i] >= 0) g.set_pose(g.nodes()[i].id, candidate[i]);
    ++res.iterations;
    const double rel = (current - cand_chi2) / current;
    current = cand_chi2;
    if (rel < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.final_chi2 = current;
  return res;
}

}  // namespace quadslam::slam
