#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gaspipe/core.hpp"

namespace gaspipe {

enum class NodeKind { source, sink, junction };
enum class EdgeKind { pipe, valve, compressor };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::source: return "source";
    case NodeKind::sink: return "sink";
    default: return "junction";
  }
}

inline const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::pipe: return "pipe";
    case EdgeKind::valve: return "valve";
    default: return "compressor";
  }
}

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::junction;
  std::optional<std::string> injection_profile;  // profile id, kg/s, +injection
  double pressure_init = 0.0;                    // Pa
};

struct EdgeSpec {
  std::string id;
  std::string from;
  std::string to;
  EdgeKind kind = EdgeKind::pipe;
  double length = 0.0;    // m
  double diameter = 0.0;  // m
  double friction = 0.0;  // Darcy-Weisbach, dimensionless
  // Device parameters: compressor "ratio_min"/"ratio_max",
  // valve "opening_init"; empty for plain pipes.
  std::map<std::string, double> device;
};

/// Oriented incidence matrix: +1 where the edge leaves the node, -1 where it
/// enters. Node/edge order is the list order. Throws TopologyError on a
/// dangling endpoint.
inline Mat build_incidence(const std::vector<NodeSpec>& nodes,
                           const std::vector<EdgeSpec>& edges) {
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    if (!index.emplace(nodes[i].id, i).second)
      throw TopologyError("duplicate node id '" + nodes[i].id + "'");
  }
  Mat B = Mat::Zero(static_cast<Eigen::Index>(nodes.size()),
                    static_cast<Eigen::Index>(edges.size()));
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
    const auto it_from = index.find(edges[e].from);
    const auto it_to = index.find(edges[e].to);
    if (it_from == index.end())
      throw TopologyError("edge '" + edges[e].id + "' has dangling endpoint '" +
                          edges[e].from + "'");
    if (it_to == index.end())
      throw TopologyError("edge '" + edges[e].id + "' has dangling endpoint '" +
                          edges[e].to + "'");
    if (it_from->second == it_to->second)
      throw TopologyError("edge '" + edges[e].id + "' is a self loop");
    B(it_from->second, e) = 1.0;
    B(it_to->second, e) = -1.0;
  }
  return B;
}

/// Equivalent nodal volumes: each edge donates half its physical volume,
/// (pi/8) D^2 L, to each endpoint. Isolated nodes get V_i = 0.
inline Vec nodal_volumes(const std::vector<NodeSpec>& nodes,
                         const std::vector<EdgeSpec>& edges) {
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) index[nodes[i].id] = i;
  Vec V = Vec::Zero(static_cast<Eigen::Index>(nodes.size()));
  for (const auto& e : edges) {
    if (e.length <= 0.0 || e.diameter <= 0.0)
      throw ParameterError("edge '" + e.id + "' has nonpositive geometry");
    const double half = (M_PI / 8.0) * e.diameter * e.diameter * e.length;
    V(index.at(e.from)) += half;
    V(index.at(e.to)) += half;
  }
  return V;
}

/// Net outflow per node, B*q. Positive entries leave the node.
inline Vec net_outflow(const Mat& B, const Vec& q) {
  require_dim(B.cols() == q.size(), "net_outflow: q length vs edge count");
  return B * q;
}

struct PipelineNetwork {
  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;
  Mat incidence;          // n x m
  Vec volumes;            // m^3
  double sound_speed = 380.0;  // m/s
  std::vector<int> actuated_edges;  // valve/compressor edge indices, file order
  std::vector<std::string> warnings;

  int n() const { return static_cast<int>(nodes.size()); }
  int m() const { return static_cast<int>(edges.size()); }
  int n_u() const { return static_cast<int>(actuated_edges.size()); }

  int node_index(const std::string& id) const {
    const auto it = node_index_.find(id);
    if (it == node_index_.end()) throw TopologyError("unknown node id '" + id + "'");
    return it->second;
  }
  int edge_index(const std::string& id) const {
    const auto it = edge_index_.find(id);
    if (it == edge_index_.end()) throw TopologyError("unknown edge id '" + id + "'");
    return it->second;
  }

  /// Position of edge `e` in the actuator vector, or -1 if not actuated.
  int actuator_of_edge(int e) const {
    for (int a = 0; a < n_u(); ++a)
      if (actuated_edges[a] == e) return a;
    return -1;
  }

  static PipelineNetwork make(std::vector<NodeSpec> nodes,
                              std::vector<EdgeSpec> edges,
                              double sound_speed) {
    PipelineNetwork net;
    net.nodes = std::move(nodes);
    net.edges = std::move(edges);
    net.sound_speed = sound_speed;
    if (sound_speed <= 0.0) throw ParameterError("sound speed must be positive");
    for (const auto& e : net.edges) {
      if (e.length <= 0.0)
        throw ParameterError("edge '" + e.id + "': length must be positive");
      if (e.diameter <= 0.0)
        throw ParameterError("edge '" + e.id + "': diameter must be positive");
      if (!(e.friction > 0.0 && e.friction < 0.1))
        throw ParameterError("edge '" + e.id + "': friction outside (0, 0.1)");
      if (e.kind == EdgeKind::pipe && !e.device.empty())
        throw ParameterError("edge '" + e.id + "': plain pipe carries device parameters");
    }
    net.incidence = build_incidence(net.nodes, net.edges);
    net.volumes = nodal_volumes(net.nodes, net.edges);
    for (int i = 0; i < net.n(); ++i) {
      net.node_index_[net.nodes[i].id] = i;
      if (net.volumes(i) <= 0.0)
        net.warnings.push_back("node '" + net.nodes[i].id +
                               "' is isolated; its pressure is held constant");
    }
    for (int e = 0; e < net.m(); ++e) {
      if (!net.edge_index_.emplace(net.edges[e].id, e).second)
        throw TopologyError("duplicate edge id '" + net.edges[e].id + "'");
      if (net.edges[e].kind != EdgeKind::pipe) net.actuated_edges.push_back(e);
    }
    return net;
  }

 private:
  std::unordered_map<std::string, int> node_index_;
  std::unordered_map<std::string, int> edge_index_;
};

}  // namespace gaspipe
