#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gaspipe/hydraulics.hpp"
#include "support/builders.hpp"

using namespace gaspipe;
using Catch::Approx;

namespace {

HydraulicConfig cfg1() {
  HydraulicConfig c;
  c.timestep = 900.0;
  c.smoothing = 1e6;
  c.sound_speed = 380.0;
  return c;
}

double exact_weymouth(double p_i, double p_j, double K) {
  const double x = p_i * p_i - p_j * p_j;
  const double s = x >= 0.0 ? 1.0 : -1.0;
  return s * std::sqrt(std::fabs(x)) / K;
}

}  // namespace

TEST_CASE("pipe resistance matches the composite formula") {
  const auto e = testutil::pipe("e", "a", "b", 10e3);
  const double K = pipe_resistance(e, 380.0);
  REQUIRE(K == Approx(2.998e4).epsilon(1e-3));
  // doubling length scales K by sqrt(2)
  auto e2 = e;
  e2.length *= 2.0;
  REQUIRE(pipe_resistance(e2, 380.0) == Approx(std::sqrt(2.0) * K).epsilon(1e-12));
  // monotone in friction, decreasing in diameter
  auto ef = e;
  ef.friction = 0.02;
  REQUIRE(pipe_resistance(ef, 380.0) > K);
  auto ed = e;
  ed.diameter = 0.6;
  REQUIRE(pipe_resistance(ed, 380.0) < K);
}

TEST_CASE("pipe resistance rejects nonpositive geometry") {
  auto e = testutil::pipe("e", "a", "b", 10e3);
  e.diameter = 0.0;
  REQUIRE_THROWS_AS(pipe_resistance(e, 380.0), ParameterError);
}

TEST_CASE("edge flow is zero at equal pressures") {
  const auto e = testutil::pipe("e", "a", "b", 10e3);
  REQUIRE(edge_flow(3.5e6, 3.5e6, e, 0.0, cfg1()) == 0.0);
}

TEST_CASE("smoothed flow matches the exact relation within 0.1% at Table-scale drops") {
  const auto e = testutil::pipe("e", "a", "b", 10e3);
  const double K = pipe_resistance(e, 380.0);
  const double q = edge_flow(3.6e6, 3.4e6, e, 0.0, cfg1());
  const double q_exact = exact_weymouth(3.6e6, 3.4e6, K);
  REQUIRE(q > 0.0);
  REQUIRE(q == Approx(q_exact).epsilon(1e-3));
}

TEST_CASE("smoothing error is bounded by sqrt(eps)/K uniformly") {
  const auto e = testutil::pipe("e", "a", "b", 10e3);
  const double K = pipe_resistance(e, 380.0);
  const auto cfg = cfg1();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> pr(2.0e6, 5.0e6);
  for (int i = 0; i < 2000; ++i) {
    const double pi = pr(rng);
    const double pj = pr(rng);
    const double q = edge_flow(pi, pj, e, 0.0, cfg);
    const double qe = exact_weymouth(pi, pj, K);
    REQUIRE(std::fabs(q - qe) <= std::sqrt(cfg.smoothing) / K + 1e-12);
  }
}

TEST_CASE("pipe flow is antisymmetric") {
  const auto e = testutil::pipe("e", "a", "b", 10e3);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> pr(2.0e6, 5.0e6);
  for (int i = 0; i < 200; ++i) {
    const double pi = pr(rng);
    const double pj = pr(rng);
    REQUIRE(edge_flow(pi, pj, e, 0.0, cfg1()) ==
            Approx(-edge_flow(pj, pi, e, 0.0, cfg1())).margin(1e-12));
  }
}

TEST_CASE("pipe flow is nondecreasing in upstream pressure") {
  const auto e = testutil::pipe("e", "a", "b", 10e3);
  double prev = -1e99;
  for (double pi = 2.0e6; pi <= 5.0e6; pi += 0.05e6) {
    const double q = edge_flow(pi, 3.3e6, e, 0.0, cfg1());
    REQUIRE(q >= prev);
    prev = q;
  }
}

TEST_CASE("closed valve carries no flow at any drop") {
  const auto e = testutil::valve("v", "a", "b");
  REQUIRE(edge_flow(5.0e6, 2.0e6, e, 0.0, cfg1()) == 0.0);
  REQUIRE(edge_flow(5.0e6, 2.0e6, e, 1e-4, cfg1()) == 0.0);
}

TEST_CASE("valve flow magnitude is nondecreasing in opening") {
  const auto e = testutil::valve("v", "a", "b");
  double prev = 0.0;
  for (double a = 0.0; a <= 1.0; a += 0.02) {
    const double q = std::fabs(edge_flow(3.6e6, 3.4e6, e, a, cfg1()));
    REQUIRE(q >= prev - 1e-12);
    prev = q;
  }
}

TEST_CASE("valve opening outside [0,1] raises actuator error") {
  const auto e = testutil::valve("v", "a", "b");
  REQUIRE_THROWS_AS(edge_flow(3.6e6, 3.4e6, e, 1.2, cfg1()), ActuatorError);
}

TEST_CASE("compressor boost pushes flow against adverse drop") {
  const auto e = testutil::compressor("c", "a", "b");
  // downstream pressure slightly above upstream: boosted flow still positive
  const double q = edge_flow(3.5e6, 3.6e6, e, 1.2, cfg1());
  REQUIRE(q > 0.0);
  REQUIRE_THROWS_AS(edge_flow(3.5e6, 3.6e6, e, 0.9, cfg1()), ActuatorError);
}

TEST_CASE("equilibrium state is a fixed point of the Euler step") {
  const auto net = testutil::path3();
  const Vec p = Vec::Constant(3, 3.5e6);
  const Vec q = Vec::Zero(2);
  const Vec w = Vec::Zero(3);
  REQUIRE(step_pressures(net, p, q, w, cfg1()) == p);
}

TEST_CASE("unit inflow raises pressure by Ts c^2 / V") {
  // geometry chosen so each nodal volume is exactly 1000 m^3
  const double L = 8000.0 / (M_PI * 0.25);
  const auto net = PipelineNetwork::make(
      {testutil::node("a", NodeKind::source), testutil::node("b", NodeKind::sink)},
      {testutil::pipe("ab", "a", "b", L)}, 380.0);
  REQUIRE(net.volumes(0) == Approx(1000.0).epsilon(1e-12));
  Vec w(2);
  w << 1.0, 0.0;
  const Vec p = Vec::Constant(2, 3.5e6);
  const Vec next = step_pressures(net, p, Vec::Zero(1), w, cfg1());
  REQUIRE(next(0) - p(0) == Approx(129960.0).epsilon(1e-12));
  REQUIRE(next(1) == p(1));
}

TEST_CASE("mass accounting holds per step") {
  std::mt19937 rng(23);
  std::normal_distribution<double> wdist(0.0, 3.0);
  const auto cfg = [] {
    auto c = cfg1();
    c.timestep = 5.0;
    return c;
  }();
  for (int trial = 0; trial < 5; ++trial) {
    const auto net = testutil::random_net(rng, 6, 3);
    Vec p = Vec::Constant(net.n(), 3.5e6);
    Vec w(net.n());
    for (int i = 0; i < net.n(); ++i) w(i) = wdist(rng);
    const Vec alpha = Vec::Zero(net.n_u());
    for (int k = 0; k < 50; ++k) {
      const Vec q = edge_flows(net, p, alpha, cfg);
      const Vec next = step_pressures(net, p, q, w, cfg);
      const double c2 = cfg.sound_speed * cfg.sound_speed;
      double lhs = 0.0;
      for (int i = 0; i < net.n(); ++i)
        lhs += net.volumes(i) * (next(i) - p(i)) / (cfg.timestep * c2);
      REQUIRE(lhs == Approx(w.sum()).margin(1e-9 * std::max(1.0, std::fabs(w.sum()))));
      p = next;
    }
  }
}

TEST_CASE("nonpositive pressure raises integration error naming the node") {
  const auto net = testutil::pair2();
  Vec w(2);
  w << 0.0, -500.0;  // huge withdrawal
  const Vec p = Vec::Constant(2, 1.0e5);
  auto cfg = cfg1();
  cfg.timestep = 1e5;
  REQUIRE_THROWS_WITH(step_pressures(net, p, Vec::Zero(1), w, cfg),
                      Catch::Matchers::ContainsSubstring("b"));
}

TEST_CASE("flow jacobians match central finite differences") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> pr(2.5e6, 4.5e6);
  std::uniform_real_distribution<double> open(0.15, 0.95);
  std::uniform_real_distribution<double> ratio(1.05, 1.4);
  const auto net = testutil::actuated4();
  const auto cfg = cfg1();
  for (int trial = 0; trial < 50; ++trial) {
    Vec p(net.n());
    for (int i = 0; i < net.n(); ++i) p(i) = pr(rng);
    Vec alpha(net.n_u());
    alpha << ratio(rng), open(rng);
    const auto J = flow_jacobians(net, p, alpha, cfg, /*freeze=*/false);
    const double hp = 10.0;
    for (int i = 0; i < net.n(); ++i) {
      Vec pp = p, pm = p;
      pp(i) += hp;
      pm(i) -= hp;
      const Vec dq = (edge_flows(net, pp, alpha, cfg) - edge_flows(net, pm, alpha, cfg)) /
                     (2.0 * hp);
      for (int e = 0; e < net.m(); ++e) {
        const double scale = std::max(1e-8, std::fabs(dq(e)));
        REQUIRE(J.dq_dp(e, i) == Approx(dq(e)).margin(1e-4 * scale + 1e-12));
      }
    }
    const double ha = 1e-5;
    for (int a = 0; a < net.n_u(); ++a) {
      Vec ap = alpha, am = alpha;
      ap(a) += ha;
      am(a) -= ha;
      const Vec dq = (edge_flows(net, p, ap, cfg) - edge_flows(net, p, am, cfg)) /
                     (2.0 * ha);
      for (int e = 0; e < net.m(); ++e) {
        const double scale = std::max(1e-8, std::fabs(dq(e)));
        REQUIRE(J.dq_dalpha(e, a) == Approx(dq(e)).margin(1e-4 * scale + 1e-10));
      }
    }
  }
}

TEST_CASE("closed valve jacobian row is identically zero") {
  const auto net = testutil::actuated4();
  Vec p = Vec::Constant(net.n(), 3.5e6);
  Vec alpha(2);
  alpha << 1.1, 0.0;
  const auto J = flow_jacobians(net, p, alpha, cfg1());
  const int ve = net.edge_index("vlv");
  REQUIRE(J.dq_dp.row(ve).isZero());
  REQUIRE(J.dq_dalpha.row(ve).isZero());
}

TEST_CASE("pipe jacobian is antisymmetric at equal end pressures") {
  const auto net = testutil::pair2();
  const Vec alpha = Vec::Zero(0);
  Vec p(2);
  p << 3.5e6 + 5.0, 3.5e6;
  const auto J = flow_jacobians(net, p, alpha, cfg1());
  REQUIRE(J.dq_dp(0, 0) == Approx(-J.dq_dp(0, 1)).epsilon(1e-5));
}

TEST_CASE("actuator slope freezes at hard limits") {
  const auto net = testutil::actuated4();
  Vec p = Vec::Constant(net.n(), 3.5e6);
  p(3) = 3.3e6;
  Vec alpha(2);
  alpha << 1.5, 1.0;  // both at upper limits
  const auto frozen = flow_jacobians(net, p, alpha, cfg1(), true);
  REQUIRE(frozen.dq_dalpha.isZero());
  const auto live = flow_jacobians(net, p, alpha, cfg1(), false);
  REQUIRE(live.dq_dalpha(net.edge_index("vlv"), 1) > 0.0);
}

TEST_CASE("interval propagation jacobian matches finite differences") {
  const auto net = testutil::actuated4();
  auto cfg = cfg1();
  cfg.timestep = 10.0;
  Vec alpha(2);
  alpha << 1.04, 0.6;
  Vec w(4);
  w << 8.0, 0.0, 0.0, -8.0;
  const Vec p = solve_steady_state(net, w, alpha, cfg).pressures;
  const int nsub = 10;
  const auto map = propagate_interval(net, p, alpha, w, cfg, nsub, true, false);
  const double hp = 10.0;
  for (int i = 0; i < net.n(); ++i) {
    Vec pp = p, pm = p;
    pp(i) += hp;
    pm(i) -= hp;
    const Vec fp = propagate_interval(net, pp, alpha, w, cfg, nsub, false).p_end;
    const Vec fm = propagate_interval(net, pm, alpha, w, cfg, nsub, false).p_end;
    const Vec col = (fp - fm) / (2.0 * hp);
    for (int r = 0; r < net.n(); ++r)
      REQUIRE(map.F(r, i) == Approx(col(r)).margin(1e-4 * std::max(1.0, std::fabs(col(r)))));
  }
}

TEST_CASE("steady state with zero injections is the uniform field") {
  const auto net = testutil::path3();
  const auto ss = solve_steady_state(net, Vec::Zero(3), Vec::Zero(0), cfg1());
  REQUIRE(ss.flows.lpNorm<Eigen::Infinity>() < 1e-6);
  REQUIRE(ss.pressures(1) == Approx(3.5e6).margin(200.0));
}

TEST_CASE("two-node steady state matches the closed-form inversion") {
  const auto net = testutil::pair2();
  const auto cfg = cfg1();
  Vec w(2);
  w << 0.0, -10.0;
  const auto ss = solve_steady_state(net, w, Vec::Zero(0), cfg);
  REQUIRE(ss.flows(0) == Approx(10.0).margin(1e-6));
  // invert the smoothed relation independently: phi(x) = qK
  const double K = pipe_resistance(net.edges[0], cfg.sound_speed);
  const double y = 10.0 * K;
  const double x = 0.5 * (y * y + std::sqrt(y * y * y * y + 4.0 * y * y * cfg.smoothing));
  const double p2 = std::sqrt(3.5e6 * 3.5e6 - x);
  REQUIRE(ss.pressures(1) == Approx(p2).margin(1.0));
  REQUIRE(ss.pressures(0) == 3.5e6);
}

TEST_CASE("steady state requires a fixed-pressure node") {
  const auto net = PipelineNetwork::make(
      {testutil::node("a", NodeKind::junction), testutil::node("b", NodeKind::junction)},
      {testutil::pipe("ab", "a", "b", 10e3)}, 380.0);
  REQUIRE_THROWS_AS(solve_steady_state(net, Vec::Zero(2), Vec::Zero(0), cfg1()),
                    ParameterError);
}

TEST_CASE("stability metric grows with the time step") {
  const auto net = testutil::path3();
  Vec p(3);
  p << 3.6e6, 3.5e6, 3.4e6;
  auto cfg = cfg1();
  cfg.timestep = 1.0;
  const double m1 = stability_metric(net, p, Vec::Zero(0), cfg);
  cfg.timestep = 900.0;
  REQUIRE(stability_metric(net, p, Vec::Zero(0), cfg) == Approx(900.0 * m1).epsilon(1e-9));
}
