#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gaspipe/core.hpp"
#include "gaspipe/network.hpp"

namespace gaspipe {

struct HydraulicConfig {
  double timestep = 900.0;       // s, one forward-Euler step
  double smoothing = 1.0e6;      // Pa^2, Weymouth regularization
  double sound_speed = 380.0;    // m/s
};

/// True plant state at one control step.
struct SimState {
  int k = 0;
  Vec pressures;   // Pa, per node
  Vec flows;       // kg/s, per edge
  Vec actuators;   // per actuated edge: compressor ratio or valve opening
  Vec injections;  // kg/s, per node, +injection
};

// Valve openings at or below this are treated as fully closed.
inline constexpr double kValveClosedBelow = 1e-3;

inline double compressor_ratio_min(const EdgeSpec& e) {
  const auto it = e.device.find("ratio_min");
  return it == e.device.end() ? 1.0 : it->second;
}

inline double compressor_ratio_max(const EdgeSpec& e) {
  const auto it = e.device.find("ratio_max");
  return it == e.device.end() ? 1.5 : it->second;
}

/// Composite Weymouth resistance K_e = sqrt(16 f c^2 L / (pi^2 D^5)).
inline double pipe_resistance(const EdgeSpec& e, double sound_speed) {
  if (e.length <= 0.0 || e.diameter <= 0.0 || e.friction <= 0.0)
    throw ParameterError("pipe_resistance: nonpositive geometry on edge '" + e.id + "'");
  const double d5 = std::pow(e.diameter, 5);
  return std::sqrt(16.0 * e.friction * sound_speed * sound_speed * e.length /
                   (M_PI * M_PI * d5));
}

namespace detail {

// Smoothed signed square root: phi(x) = x / sqrt(|x| + eps).
// Recovers sgn(x) sqrt(|x|) as eps -> 0; |phi - exact| <= sqrt(eps).
inline double smooth_signed_sqrt(double x, double eps) {
  return x / std::sqrt(std::fabs(x) + eps);
}

inline double smooth_signed_sqrt_deriv(double x, double eps) {
  const double ax = std::fabs(x);
  const double s = ax + eps;
  return (0.5 * ax + eps) / (s * std::sqrt(s));
}

}  // namespace detail

/// Flow on one edge from endpoint pressures and the actuator setting.
/// Pipes ignore alpha; valves scale conductance by opening; compressors
/// boost the upstream pressure by the ratio before the Weymouth relation.
inline double edge_flow(double p_i, double p_j, const EdgeSpec& e, double alpha,
                        const HydraulicConfig& cfg) {
  const double K = pipe_resistance(e, cfg.sound_speed);
  switch (e.kind) {
    case EdgeKind::pipe: {
      const double x = p_i * p_i - p_j * p_j;
      return detail::smooth_signed_sqrt(x, cfg.smoothing) / K;
    }
    case EdgeKind::valve: {
      if (alpha < 0.0 || alpha > 1.0)
        throw ActuatorError("valve '" + e.id + "': opening outside [0,1]");
      if (alpha <= kValveClosedBelow) return 0.0;
      const double x = p_i * p_i - p_j * p_j;
      return alpha * detail::smooth_signed_sqrt(x, cfg.smoothing) / K;
    }
    case EdgeKind::compressor: {
      const double lo = compressor_ratio_min(e);
      const double hi = compressor_ratio_max(e);
      if (alpha < lo - 1e-12 || alpha > hi + 1e-12)
        throw ActuatorError("compressor '" + e.id + "': ratio outside bounds");
      const double boosted = alpha * p_i;
      const double x = boosted * boosted - p_j * p_j;
      return detail::smooth_signed_sqrt(x, cfg.smoothing) / K;
    }
  }
  return 0.0;
}

/// All edge flows for the given pressures and actuator vector.
inline Vec edge_flows(const PipelineNetwork& net, const Vec& p, const Vec& alpha,
                      const HydraulicConfig& cfg) {
  require_dim(p.size() == net.n(), "edge_flows: pressure vector");
  require_dim(alpha.size() == net.n_u(), "edge_flows: actuator vector");
  Vec q(net.m());
  for (int e = 0; e < net.m(); ++e) {
    const auto& spec = net.edges[e];
    const int i = net.node_index(spec.from);
    const int j = net.node_index(spec.to);
    const int a = net.actuator_of_edge(e);
    const double al = a >= 0 ? alpha(a) : 0.0;
    q(e) = edge_flow(p(i), p(j), spec, al, cfg);
  }
  return q;
}

struct FlowJacobians {
  Mat dq_dp;      // m x n
  Mat dq_dalpha;  // m x n_u
};

/// Analytic sensitivities of the smoothed flow laws. When
/// `freeze_at_limits` is set, actuator columns are zeroed for devices
/// sitting at a hard bound (the estimator convention); pass false to keep
/// live slopes for control design.
inline FlowJacobians flow_jacobians(const PipelineNetwork& net, const Vec& p,
                                    const Vec& alpha, const HydraulicConfig& cfg,
                                    bool freeze_at_limits = true) {
  require_dim(p.size() == net.n(), "flow_jacobians: pressure vector");
  require_dim(alpha.size() == net.n_u(), "flow_jacobians: actuator vector");
  FlowJacobians J;
  J.dq_dp = Mat::Zero(net.m(), net.n());
  J.dq_dalpha = Mat::Zero(net.m(), net.n_u());
  const double eps = cfg.smoothing;
  for (int e = 0; e < net.m(); ++e) {
    const auto& spec = net.edges[e];
    const int i = net.node_index(spec.from);
    const int j = net.node_index(spec.to);
    const double K = pipe_resistance(spec, cfg.sound_speed);
    const int a = net.actuator_of_edge(e);
    switch (spec.kind) {
      case EdgeKind::pipe: {
        const double x = p(i) * p(i) - p(j) * p(j);
        const double dphi = detail::smooth_signed_sqrt_deriv(x, eps);
        J.dq_dp(e, i) = dphi * 2.0 * p(i) / K;
        J.dq_dp(e, j) = -dphi * 2.0 * p(j) / K;
        break;
      }
      case EdgeKind::valve: {
        const double al = alpha(a);
        if (al <= kValveClosedBelow) break;  // closed: row stays zero
        const double x = p(i) * p(i) - p(j) * p(j);
        const double phi = detail::smooth_signed_sqrt(x, eps);
        const double dphi = detail::smooth_signed_sqrt_deriv(x, eps);
        J.dq_dp(e, i) = al * dphi * 2.0 * p(i) / K;
        J.dq_dp(e, j) = -al * dphi * 2.0 * p(j) / K;
        const bool at_limit = al >= 1.0 - 1e-12;
        J.dq_dalpha(e, a) = (freeze_at_limits && at_limit) ? 0.0 : phi / K;
        break;
      }
      case EdgeKind::compressor: {
        const double al = alpha(a);
        const double boosted = al * p(i);
        const double x = boosted * boosted - p(j) * p(j);
        const double dphi = detail::smooth_signed_sqrt_deriv(x, eps);
        J.dq_dp(e, i) = dphi * 2.0 * al * al * p(i) / K;
        J.dq_dp(e, j) = -dphi * 2.0 * p(j) / K;
        const bool at_limit = al <= compressor_ratio_min(spec) + 1e-12 ||
                              al >= compressor_ratio_max(spec) - 1e-12;
        J.dq_dalpha(e, a) =
            (freeze_at_limits && at_limit) ? 0.0 : dphi * 2.0 * al * p(i) * p(i) / K;
        break;
      }
    }
  }
  return J;
}

/// One forward-Euler pressure step:
///   p_i' = p_i + T_s c^2 / V_i * (net inflow + w_i).
/// Nodes with zero volume are held constant. Throws IntegrationError if a
/// pressure would become nonpositive.
inline Vec step_pressures(const PipelineNetwork& net, const Vec& p, const Vec& q,
                          const Vec& w, const HydraulicConfig& cfg) {
  require_dim(p.size() == net.n() && q.size() == net.m() && w.size() == net.n(),
              "step_pressures");
  const Vec outflow = net.incidence * q;
  const double c2 = cfg.sound_speed * cfg.sound_speed;
  Vec next = p;
  for (int i = 0; i < net.n(); ++i) {
    if (net.volumes(i) <= 0.0) continue;
    next(i) += cfg.timestep * c2 / net.volumes(i) * (w(i) - outflow(i));
    if (!(next(i) > 0.0))
      throw IntegrationError("pressure at node '" + net.nodes[i].id +
                             "' became nonpositive; reduce the time step");
  }
  return next;
}

struct IntervalMap {
  Vec p_end;  // pressures after the interval
  Mat F;      // d p_end / d p_start, n x n
  Mat G;      // d p_end / d alpha,   n x n_u
};

/// Advance the pressures over `substeps` Euler steps of cfg.timestep with
/// constant actuators and injections, composing the step Jacobians.
inline IntervalMap propagate_interval(const PipelineNetwork& net, const Vec& p0,
                                      const Vec& alpha, const Vec& w,
                                      const HydraulicConfig& cfg, int substeps,
                                      bool with_jacobians = true,
                                      bool freeze_at_limits = true) {
  IntervalMap out;
  out.p_end = p0;
  if (with_jacobians) {
    out.F = Mat::Identity(net.n(), net.n());
    out.G = Mat::Zero(net.n(), net.n_u());
  }
  const double c2 = cfg.sound_speed * cfg.sound_speed;
  for (int s = 0; s < substeps; ++s) {
    const Vec q = edge_flows(net, out.p_end, alpha, cfg);
    if (with_jacobians) {
      const FlowJacobians J = flow_jacobians(net, out.p_end, alpha, cfg, freeze_at_limits);
      Mat Fs = Mat::Identity(net.n(), net.n());
      Mat Gs = Mat::Zero(net.n(), net.n_u());
      for (int i = 0; i < net.n(); ++i) {
        if (net.volumes(i) <= 0.0) continue;
        const double scale = cfg.timestep * c2 / net.volumes(i);
        Fs.row(i) -= scale * (net.incidence.row(i) * J.dq_dp);
        Gs.row(i) -= scale * (net.incidence.row(i) * J.dq_dalpha);
      }
      out.G = Fs * out.G + Gs;
      out.F = Fs * out.F;
    }
    out.p_end = step_pressures(net, out.p_end, q, w, cfg);
  }
  return out;
}

/// Explicit-Euler stiffness heuristic: max_i T_s c^2 / V_i * sum_e |dq_e/dp_i|.
/// Values above 1 indicate the step may be unstable.
inline double stability_metric(const PipelineNetwork& net, const Vec& p,
                               const Vec& alpha, const HydraulicConfig& cfg) {
  const FlowJacobians J = flow_jacobians(net, p, alpha, cfg);
  const double c2 = cfg.sound_speed * cfg.sound_speed;
  double worst = 0.0;
  for (int i = 0; i < net.n(); ++i) {
    if (net.volumes(i) <= 0.0) continue;
    double sum = 0.0;
    for (int e = 0; e < net.m(); ++e)
      if (net.incidence(i, e) != 0.0) sum += std::fabs(J.dq_dp(e, i));
    worst = std::max(worst, cfg.timestep * c2 / net.volumes(i) * sum);
  }
  return worst;
}

struct SteadyState {
  Vec pressures;
  Vec flows;
  int iterations = 0;
  double residual = 0.0;  // kg/s, inf-norm of nodal imbalance at free nodes
};

/// Damped Newton for the steady nodal balance (B q)(p) = w at free nodes,
/// holding `fixed_nodes` at their given pressures. Default fixed set: all
/// source nodes at their pressure_init.
inline SteadyState solve_steady_state(const PipelineNetwork& net, const Vec& w,
                                      const Vec& alpha, const HydraulicConfig& cfg,
                                      std::vector<int> fixed_nodes = {},
                                      const Vec* p_start = nullptr) {
  require_dim(w.size() == net.n(), "solve_steady_state: injection vector");
  if (fixed_nodes.empty()) {
    for (int i = 0; i < net.n(); ++i)
      if (net.nodes[i].kind == NodeKind::source) fixed_nodes.push_back(i);
  }
  if (fixed_nodes.empty())
    throw ParameterError("solve_steady_state: no fixed-pressure node");

  std::vector<bool> is_fixed(net.n(), false);
  for (int i : fixed_nodes) is_fixed[i] = true;
  std::vector<int> free_nodes;
  for (int i = 0; i < net.n(); ++i)
    if (!is_fixed[i]) free_nodes.push_back(i);

  Vec p(net.n());
  for (int i = 0; i < net.n(); ++i) p(i) = net.nodes[i].pressure_init;
  if (p_start) p = *p_start;

  const auto residual_vec = [&](const Vec& pr) -> Vec {
    const Vec q = edge_flows(net, pr, alpha, cfg);
    const Vec bal = net.incidence * q - w;
    Vec r(static_cast<Eigen::Index>(free_nodes.size()));
    for (size_t k = 0; k < free_nodes.size(); ++k) r(k) = bal(free_nodes[k]);
    return r;
  };

  constexpr int kMaxIter = 200;
  Vec r = residual_vec(p);
  int iter = 0;
  for (; iter < kMaxIter; ++iter) {
    if (r.lpNorm<Eigen::Infinity>() < 1e-6) break;
    const FlowJacobians J = flow_jacobians(net, p, alpha, cfg);
    const Mat dq_dp = J.dq_dp;
    Mat Jr(free_nodes.size(), free_nodes.size());
    for (size_t a = 0; a < free_nodes.size(); ++a)
      for (size_t b = 0; b < free_nodes.size(); ++b)
        Jr(a, b) = net.incidence.row(free_nodes[a]).dot(dq_dp.col(free_nodes[b]));
    Vec step = Jr.fullPivLu().solve(-r);
    double t = 1.0;
    const double r0 = r.norm();
    Vec p_trial;
    for (int h = 0; h < 40; ++h) {
      p_trial = p;
      bool positive = true;
      for (size_t kk = 0; kk < free_nodes.size(); ++kk) {
        p_trial(free_nodes[kk]) += t * step(kk);
        if (p_trial(free_nodes[kk]) <= 0.0) positive = false;
      }
      if (positive) {
        const Vec r_trial = residual_vec(p_trial);
        if (r_trial.norm() < r0 || h == 39) {
          p = p_trial;
          r = r_trial;
          break;
        }
      }
      t *= 0.5;
    }
  }
  if (r.lpNorm<Eigen::Infinity>() >= 1e-6)
    throw SolverError("steady state Newton did not converge after " +
                      std::to_string(iter) + " iterations; residual " +
                      std::to_string(r.lpNorm<Eigen::Infinity>()) + " kg/s");
  SteadyState out;
  out.pressures = p;
  out.flows = edge_flows(net, p, alpha, cfg);
  out.iterations = iter;
  out.residual = r.lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace gaspipe
