#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "gaspipe/core.hpp"

namespace gaspipe {

/// Origin of an inequality row in a canonical MPC stacking. Lets downstream
/// consumers (bound propagation, branching heuristics) reason per row.
struct RowTag {
  enum class Kind {
    pressure_lower,
    pressure_upper,
    actuator_lower,
    actuator_upper,
    ramp_lower,
    ramp_upper,
    generic,
  };
  Kind kind = Kind::generic;
  int step = 0;   // horizon offset
  int index = 0;  // node or actuator index
};

/// Convex QP in the canonical form
///   min 1/2 z'Hz + h'z   s.t.  G z <= g,  E z = e.
struct CanonicalQp {
  Mat H;
  Vec h;
  Mat G;
  Vec g;
  Mat E;
  Vec e;
  std::vector<RowTag> ineq_tags;  // may be empty; else one per row of G

  int num_vars() const { return static_cast<int>(H.rows()); }
  int num_ineq() const { return static_cast<int>(G.rows()); }
  int num_eq() const { return static_cast<int>(E.rows()); }

  double objective(const Vec& z) const {
    return 0.5 * z.dot(H * z) + h.dot(z);
  }

  void check_dims() const {
    require_dim(H.rows() == H.cols(), "QP: H square");
    require_dim(h.size() == H.rows(), "QP: h length");
    require_dim(G.rows() == 0 || G.cols() == H.rows(), "QP: G columns");
    require_dim(g.size() == G.rows(), "QP: g length");
    require_dim(E.rows() == 0 || E.cols() == H.rows(), "QP: E columns");
    require_dim(e.size() == E.rows(), "QP: e length");
  }
};

enum class QpStatus { optimal, max_iter, infeasible };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    default: return "infeasible";
  }
}

struct QpSolution {
  Vec z;
  Vec lambda;  // inequality multipliers, >= 0
  Vec nu;      // equality multipliers
  Vec slack;   // g - Gz at the solution
  QpStatus status = QpStatus::max_iter;
  double objective = 0.0;
  double stationarity_residual = 0.0;
  double primal_residual = 0.0;
  double complementarity = 0.0;
  int iterations = 0;
};

struct QpOptions {
  int max_iterations = 100;
  double tol_stationarity = 1e-6;  // scaled by 1 + |h|_inf
  double tol_feasibility = 1e-8;   // scaled by 1 + |[g;e]|_inf
  double tol_complementarity = 1e-8;
  double regularization = 1e-11;   // static diagonal shift on the KKT system
};

/// Primal-dual interior-point solver with Mehrotra predictor-corrector
/// steps. Dense; intended for the small stackings this project produces.
inline QpSolution solve_qp(const CanonicalQp& qp, const QpOptions& opt = {}) {
  qp.check_dims();
  const int n = qp.num_vars();
  const int mi = qp.num_ineq();
  const int me = qp.num_eq();

  QpSolution sol;
  const double hscale = 1.0 + qp.h.lpNorm<Eigen::Infinity>();
  const double gscale =
      1.0 + std::max(mi > 0 ? qp.g.lpNorm<Eigen::Infinity>() : 0.0,
                     me > 0 ? qp.e.lpNorm<Eigen::Infinity>() : 0.0);

  const auto finish = [&](const Vec& z, const Vec& lam, const Vec& nu,
                          QpStatus status, int iters) {
    sol.z = z;
    sol.lambda = lam;
    sol.nu = nu;
    sol.slack = mi > 0 ? Vec(qp.g - qp.G * z) : Vec(0);
    sol.status = status;
    sol.objective = qp.objective(z);
    Vec rd = qp.H * z + qp.h;
    if (mi > 0) rd += qp.G.transpose() * lam;
    if (me > 0) rd += qp.E.transpose() * nu;
    sol.stationarity_residual = rd.lpNorm<Eigen::Infinity>();
    double prim = 0.0;
    if (mi > 0) prim = std::max(prim, (-sol.slack).cwiseMax(0.0).maxCoeff());
    if (me > 0) prim = std::max(prim, (qp.E * z - qp.e).lpNorm<Eigen::Infinity>());
    sol.primal_residual = prim;
    sol.complementarity =
        mi > 0 ? sol.slack.cwiseMax(0.0).cwiseProduct(lam).maxCoeff() : 0.0;
    sol.iterations = iters;
    return sol;
  };

  // No inequalities: one saddle-point solve.
  if (mi == 0) {
    Mat K = Mat::Zero(n + me, n + me);
    K.topLeftCorner(n, n) = qp.H + opt.regularization * Mat::Identity(n, n);
    if (me > 0) {
      K.topRightCorner(n, me) = qp.E.transpose();
      K.bottomLeftCorner(me, n) = qp.E;
      K.bottomRightCorner(me, me) = -opt.regularization * Mat::Identity(me, me);
    }
    Vec rhs(n + me);
    rhs.head(n) = -qp.h;
    if (me > 0) rhs.tail(me) = qp.e;
    const Vec x = K.partialPivLu().solve(rhs);
    return finish(x.head(n), Vec(0), me > 0 ? Vec(x.tail(me)) : Vec(0),
                  QpStatus::optimal, 1);
  }

  // Starting point: equality-constrained solve ignoring inequalities.
  Vec z = Vec::Zero(n);
  Vec nu = Vec::Zero(me);
  {
    Mat K = Mat::Zero(n + me, n + me);
    K.topLeftCorner(n, n) = qp.H + 1e-8 * Mat::Identity(n, n);
    if (me > 0) {
      K.topRightCorner(n, me) = qp.E.transpose();
      K.bottomLeftCorner(me, n) = qp.E;
      K.bottomRightCorner(me, me) = -1e-8 * Mat::Identity(me, me);
    }
    Vec rhs(n + me);
    rhs.head(n) = -qp.h;
    if (me > 0) rhs.tail(me) = qp.e;
    const Eigen::PartialPivLU<Mat> lu(K);
    const Vec x = lu.solve(rhs);
    if (x.allFinite()) {
      z = x.head(n);
      if (me > 0) nu = x.tail(me);
    }
  }
  Vec s0 = qp.g - qp.G * z;
  Vec s = s0.cwiseMax(1.0);
  Vec lam = Vec::Ones(mi);

  const double tau = 0.995;
  int iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    const Vec rd = qp.H * z + qp.h + qp.G.transpose() * lam +
                   (me > 0 ? Vec(qp.E.transpose() * nu) : Vec(Vec::Zero(n)));
    const Vec rp = qp.G * z + s - qp.g;
    const Vec re = me > 0 ? Vec(qp.E * z - qp.e) : Vec(0);
    const double mu = s.dot(lam) / mi;

    const bool stat_ok = rd.lpNorm<Eigen::Infinity>() <= opt.tol_stationarity * hscale;
    const bool prim_ok =
        rp.lpNorm<Eigen::Infinity>() <= opt.tol_feasibility * gscale &&
        (me == 0 || re.lpNorm<Eigen::Infinity>() <= opt.tol_feasibility * gscale);
    const bool comp_ok = mu <= opt.tol_complementarity * gscale;
    if (stat_ok && prim_ok && comp_ok)
      return finish(z, lam, nu, QpStatus::optimal, iter);

    // Scaled Newton matrix shared by predictor and corrector.
    Mat K = Mat::Zero(n + me, n + me);
    K.topLeftCorner(n, n) =
        qp.H + qp.G.transpose() * (lam.cwiseQuotient(s)).asDiagonal() * qp.G +
        opt.regularization * Mat::Identity(n, n);
    if (me > 0) {
      K.topRightCorner(n, me) = qp.E.transpose();
      K.bottomLeftCorner(me, n) = qp.E;
      K.bottomRightCorner(me, me) = -opt.regularization * Mat::Identity(me, me);
    }
    Eigen::PartialPivLU<Mat> lu(K);

    const auto solve_direction = [&](const Vec& rc) {
      // rc is the target for S*lam residual: lam .* ds + s .* dlam = -rc
      Vec rhs(n + me);
      rhs.head(n) = -rd + qp.G.transpose() *
                              ((rc.array() - lam.array() * rp.array()) / s.array())
                                  .matrix();
      if (me > 0) rhs.tail(me) = -re;
      const Vec dx = lu.solve(rhs);
      struct Dir {
        Vec dz, dnu, ds, dlam;
      } d;
      d.dz = dx.head(n);
      d.dnu = me > 0 ? Vec(dx.tail(me)) : Vec(0);
      d.ds = -(rp + qp.G * d.dz);
      d.dlam = -(rc + lam.cwiseProduct(d.ds)).cwiseQuotient(s);
      return d;
    };

    const auto max_step = [&](const Vec& v, const Vec& dv) {
      double a = 1.0;
      for (int i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -tau * v(i) / dv(i));
      return a;
    };

    // Predictor (affine scaling) direction.
    const auto aff = solve_direction(s.cwiseProduct(lam));
    const double a_p = max_step(s, aff.ds);
    const double a_d = max_step(lam, aff.dlam);
    const double mu_aff =
        (s + a_p * aff.ds).dot(lam + a_d * aff.dlam) / mi;
    const double sigma = std::pow(mu_aff / mu, 3.0);

    // Corrector with centering.
    const Vec rc = s.cwiseProduct(lam) + aff.ds.cwiseProduct(aff.dlam) -
                   Vec::Constant(mi, sigma * mu);
    const auto dir = solve_direction(rc);
    const double ap = max_step(s, dir.ds);
    const double ad = max_step(lam, dir.dlam);
    const double a = std::min(ap, ad);
    if (!dir.dz.allFinite() || a < 1e-13) break;

    z += a * dir.dz;
    s += a * dir.ds;
    lam += a * dir.dlam;
    if (me > 0) nu += a * dir.dnu;
  }

  // Stalled or hit the iteration cap. Report infeasibility when a Farkas-type
  // certificate is present: dual direction with G'lam + E'nu ~ 0, lam >= 0 and
  // g'lam + e'nu < 0 (dual objective unbounded).
  const double lam_norm = lam.lpNorm<Eigen::Infinity>();
  if (lam_norm > 1e6) {
    const Vec lam_n = lam / lam_norm;
    const Vec nu_n = me > 0 ? Vec(nu / lam_norm) : Vec(0);
    Vec ray = qp.G.transpose() * lam_n;
    if (me > 0) ray += qp.E.transpose() * nu_n;
    const double val = qp.g.dot(lam_n) + (me > 0 ? qp.e.dot(nu_n) : 0.0);
    if (ray.lpNorm<Eigen::Infinity>() < 1e-6 && val < -1e-8)
      return finish(z, lam, nu, QpStatus::infeasible, iter);
  }
  return finish(z, lam, nu, QpStatus::max_iter, iter);
}

/// Plain-text serialization of a QP instance, for cross-checking against
/// external solvers. Format: dims line, then H, h, G, g, E, e row-major with
/// full precision.
inline std::string qp_to_text(const CanonicalQp& qp) {
  std::string out;
  char buf[64];
  const auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
  };
  std::snprintf(buf, sizeof(buf), "qp %d %d %d\n", qp.num_vars(), qp.num_ineq(),
                qp.num_eq());
  out += buf;
  const auto emit_mat = [&](const char* name, const Mat& M) {
    out += name;
    out += '\n';
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      for (Eigen::Index c = 0; c < M.cols(); ++c) {
        if (c) out += ' ';
        emit(M(r, c));
      }
      out += '\n';
    }
  };
  const auto emit_vec = [&](const char* name, const Vec& v) {
    out += name;
    out += '\n';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) out += ' ';
      emit(v(i));
    }
    out += '\n';
  };
  emit_mat("H", qp.H);
  emit_vec("h", qp.h);
  emit_mat("G", qp.G);
  emit_vec("g", qp.g);
  emit_mat("E", qp.E);
  emit_vec("e", qp.e);
  return out;
}

}  // namespace gaspipe
