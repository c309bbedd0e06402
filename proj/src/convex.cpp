#include "elpf/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseLU>

namespace elpf {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;
using Vec = Eigen::VectorXd;

double inf_norm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// minimize 1/2 x' diag(q) x + c' x  s.t.  A x = b,  G x + s = h,  s in K.
// K = R^l_+ x Q^{k_1} x ... ; a second-order cone block is (s_0, s_1) with
// s_0 >= |s_1|.
struct ConeProgram {
    Eigen::Index n = 0;
    Vec q, c;
    SpMat a;
    Vec b;
    SpMat g;
    Vec h;
    Eigen::Index l = 0;                // leading linear rows
    std::vector<Eigen::Index> socs;    // block sizes after the linear rows
    Eigen::Index m() const { return g.rows(); }
    double degree() const { return static_cast<double>(l + static_cast<Eigen::Index>(socs.size())); }
};

// Per-block loops over the cone.
template <class Lin, class Soc>
void for_blocks(const ConeProgram& p, Lin lin, Soc soc) {
    for (Eigen::Index i = 0; i < p.l; ++i) lin(i);
    Eigen::Index off = p.l;
    for (auto k : p.socs) {
        soc(off, k);
        off += k;
    }
}

// Jordan product u o v.
Vec jordan(const ConeProgram& p, const Vec& u, const Vec& v) {
    Vec r(u.size());
    for_blocks(
        p, [&](Eigen::Index i) { r[i] = u[i] * v[i]; },
        [&](Eigen::Index off, Eigen::Index k) {
            r[off] = u.segment(off, k).dot(v.segment(off, k));
            r.segment(off + 1, k - 1) = u[off] * v.segment(off + 1, k - 1) + v[off] * u.segment(off + 1, k - 1);
        });
    return r;
}

// Solves u o x = r for x.
Vec jordan_div(const ConeProgram& p, const Vec& u, const Vec& r) {
    Vec x(u.size());
    for_blocks(
        p, [&](Eigen::Index i) { x[i] = r[i] / u[i]; },
        [&](Eigen::Index off, Eigen::Index k) {
            const double u0 = u[off];
            const auto u1 = u.segment(off + 1, k - 1);
            const auto r1 = r.segment(off + 1, k - 1);
            const double det = u0 * u0 - u1.squaredNorm();
            const double x0 = (u0 * r[off] - u1.dot(r1)) / det;
            x[off] = x0;
            x.segment(off + 1, k - 1) = (r1 - x0 * u1) / u0;
        });
    return x;
}

Vec identity_element(const ConeProgram& p) {
    Vec e = Vec::Zero(p.m());
    for_blocks(p, [&](Eigen::Index i) { e[i] = 1.0; }, [&](Eigen::Index off, Eigen::Index) { e[off] = 1.0; });
    return e;
}

// Largest alpha in [0, cap] with u + alpha d in K.
double max_step(const ConeProgram& p, const Vec& u, const Vec& d, double cap) {
    double a = cap;
    for_blocks(
        p, [&](Eigen::Index i) { if (d[i] < 0.0) a = std::min(a, -u[i] / d[i]); },
        [&](Eigen::Index off, Eigen::Index k) {
            const double u0 = u[off], d0 = d[off];
            const auto u1 = u.segment(off + 1, k - 1);
            const auto d1 = d.segment(off + 1, k - 1);
            if (d0 < 0.0) a = std::min(a, -u0 / d0);
            // q(t) = qa t^2 + qb t + qc, qc > 0; first positive root ends the step.
            const double qa = d0 * d0 - d1.squaredNorm();
            const double qb = 2.0 * (u0 * d0 - u1.dot(d1));
            const double qc = std::max(u0 * u0 - u1.squaredNorm(), 0.0);
            double root = std::numeric_limits<double>::infinity();
            if (std::abs(qa) < 1e-300) {
                if (qb < 0.0) root = -qc / qb;
            } else {
                const double disc = qb * qb - 4.0 * qa * qc;
                if (disc >= 0.0) {
                    const double sq = std::sqrt(disc);
                    const double t1 = (-qb - std::copysign(sq, qb)) / (2.0 * qa);
                    const double t2 = t1 != 0.0 ? qc / (qa * t1) : std::numeric_limits<double>::infinity();
                    for (double t : {t1, t2})
                        if (t > 0.0) root = std::min(root, t);
                }
            }
            a = std::min(a, root);
        });
    return std::max(a, 0.0);
}

// Nesterov-Todd scaling: symmetric W with W z = W^{-1} s = lambda.
struct Scaling {
    Vec lin_d;  // sqrt(s / z) on linear rows
    std::vector<Eigen::MatrixXd> w, w_inv;
    Vec lambda;
};

Scaling nt_scaling(const ConeProgram& p, const Vec& s, const Vec& z) {
    Scaling sc;
    sc.lin_d.resize(p.l);
    sc.lambda.resize(p.m());
    for (Eigen::Index i = 0; i < p.l; ++i) {
        sc.lin_d[i] = std::sqrt(s[i] / z[i]);
        sc.lambda[i] = std::sqrt(s[i] * z[i]);
    }
    Eigen::Index off = p.l;
    for (auto k : p.socs) {
        const Vec sb = s.segment(off, k), zb = z.segment(off, k);
        const double sn = std::sqrt(std::max(sb[0] * sb[0] - sb.tail(k - 1).squaredNorm(), 1e-300));
        const double zn = std::sqrt(std::max(zb[0] * zb[0] - zb.tail(k - 1).squaredNorm(), 1e-300));
        const Vec s_bar = sb / sn, z_bar = zb / zn;
        const double gamma = std::sqrt(std::max((1.0 + s_bar.dot(z_bar)) / 2.0, 1e-300));
        Vec w_bar(k);
        w_bar[0] = (s_bar[0] + z_bar[0]) / (2.0 * gamma);
        w_bar.tail(k - 1) = (s_bar.tail(k - 1) - z_bar.tail(k - 1)) / (2.0 * gamma);
        const double beta = std::sqrt(sn / zn);
        // W = beta [w0 w1'; w1 I + w1 w1'/(1 + w0)]
        Eigen::MatrixXd wm(k, k);
        wm(0, 0) = w_bar[0];
        wm.block(0, 1, 1, k - 1) = w_bar.tail(k - 1).transpose();
        wm.block(1, 0, k - 1, 1) = w_bar.tail(k - 1);
        wm.block(1, 1, k - 1, k - 1) = Eigen::MatrixXd::Identity(k - 1, k - 1) +
                                       w_bar.tail(k - 1) * w_bar.tail(k - 1).transpose() / (1.0 + w_bar[0]);
        Eigen::MatrixXd wi = wm;
        wi.block(0, 1, 1, k - 1) *= -1.0;
        wi.block(1, 0, k - 1, 1) *= -1.0;
        sc.w.push_back(beta * wm);
        sc.w_inv.push_back(wi / beta);
        sc.lambda.segment(off, k) = sc.w.back() * zb;
        off += k;
    }
    return sc;
}

Vec apply_w(const ConeProgram& p, const Scaling& sc, const Vec& v, bool inverse) {
    Vec r(v.size());
    std::size_t b = 0;
    for_blocks(
        p, [&](Eigen::Index i) { r[i] = inverse ? v[i] / sc.lin_d[i] : v[i] * sc.lin_d[i]; },
        [&](Eigen::Index off, Eigen::Index k) {
            r.segment(off, k) = (inverse ? sc.w_inv[b] : sc.w[b]) * v.segment(off, k);
            ++b;
        });
    return r;
}

constexpr double kReg = 1e-12;

// Solves [H A'; A 0] [u; v] = [r1; r2]. The matrix is symmetrically
// equilibrated (Ruiz) before a lightly regularized LU, then refined against
// the exact operator.
class KktSolver {
  public:
    KktSolver(const SpMat& h, const SpMat& a) : n_(h.rows()), me_(a.rows()) {
        const Eigen::Index nt = n_ + me_;
        std::vector<Trip> t;
        t.reserve(static_cast<std::size_t>(h.nonZeros() + 2 * a.nonZeros()));
        for (Eigen::Index col = 0; col < h.outerSize(); ++col)
            for (SpMat::InnerIterator it(h, col); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
        for (Eigen::Index col = 0; col < a.outerSize(); ++col)
            for (SpMat::InnerIterator it(a, col); it; ++it) {
                t.emplace_back(n_ + it.row(), it.col(), it.value());
                t.emplace_back(it.col(), n_ + it.row(), it.value());
            }
        SpMat k(nt, nt);
        k.setFromTriplets(t.begin(), t.end());

        scale_ = Vec::Ones(nt);
        for (int pass = 0; pass < 10; ++pass) {
            Vec r = Vec::Zero(nt);
            for (Eigen::Index col = 0; col < k.outerSize(); ++col)
                for (SpMat::InnerIterator it(k, col); it; ++it) r[it.row()] = std::max(r[it.row()], std::abs(it.value()));
            bool done = true;
            for (Eigen::Index i = 0; i < nt; ++i) {
                r[i] = r[i] > 0.0 ? 1.0 / std::sqrt(r[i]) : 1.0;
                if (std::abs(r[i] - 1.0) > 1e-2) done = false;
            }
            k = r.asDiagonal() * k * r.asDiagonal();
            scale_ = scale_.cwiseProduct(r);
            if (done) break;
        }
        scaled_ = k;
        for (Eigen::Index i = 0; i < n_; ++i) k.coeffRef(i, i) += kReg;
        for (Eigen::Index i = 0; i < me_; ++i) k.coeffRef(n_ + i, n_ + i) -= kReg;
        k.makeCompressed();
        lu_.analyzePattern(k);
        lu_.factorize(k);
        ok_ = lu_.info() == Eigen::Success;
    }
    bool ok() const { return ok_; }
    Vec solve(const Vec& rhs) {
        const Vec b = scale_.cwiseProduct(rhs);
        Vec sol = lu_.solve(b);
        double prev = std::numeric_limits<double>::infinity();
        for (int r = 0; r < 10; ++r) {
            const Vec res = b - scaled_ * sol;
            const double nr = inf_norm(res);
            if (!(nr < 0.5 * prev) || nr <= 1e-15 * std::max(1.0, inf_norm(b))) break;
            prev = nr;
            sol += lu_.solve(res);
        }
        return scale_.cwiseProduct(sol);
    }

  private:
    Eigen::Index n_, me_;
    SpMat scaled_;
    Vec scale_;
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
    bool ok_ = false;
};

// Block-diagonal W^{-2} (linear rows: z/s).
SpMat inverse_square(const ConeProgram& p, const Scaling& sc) {
    std::vector<Trip> t;
    std::size_t b = 0;
    for_blocks(
        p, [&](Eigen::Index i) { t.emplace_back(i, i, 1.0 / (sc.lin_d[i] * sc.lin_d[i])); },
        [&](Eigen::Index off, Eigen::Index k) {
            const Eigen::MatrixXd m2 = sc.w_inv[b] * sc.w_inv[b];
            for (Eigen::Index r = 0; r < k; ++r)
                for (Eigen::Index c = 0; c < k; ++c) t.emplace_back(off + r, off + c, m2(r, c));
            ++b;
        });
    SpMat out(p.m(), p.m());
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

struct CoreResult {
    bool converged = false;
    Vec x, y, z, s;
    int iterations = 0;
    double pres = 0.0, dres = 0.0, comp = 0.0;
};

// Shifts v into the interior of K when it is not already there.
Vec push_interior(const ConeProgram& p, const Vec& v) {
    double alpha = -std::numeric_limits<double>::infinity();
    for_blocks(
        p, [&](Eigen::Index i) { alpha = std::max(alpha, -v[i]); },
        [&](Eigen::Index off, Eigen::Index k) { alpha = std::max(alpha, v.segment(off + 1, k - 1).norm() - v[off]); });
    if (p.m() == 0 || alpha < 0.0) return v;
    return v + (1.0 + alpha) * identity_element(p);
}

// Primal-dual predictor-corrector method with Nesterov-Todd scaling.
CoreResult cone_qp(const ConeProgram& p, const ConvexOptions& opts) {
    const Eigen::Index n = p.n, me = p.a.rows(), m = p.m();
    const SpMat at = p.a.transpose(), gt = p.g.transpose();
    SpMat pq(n, n);
    {
        std::vector<Trip> t;
        for (Eigen::Index i = 0; i < n; ++i) t.emplace_back(i, i, p.q[i]);
        pq.setFromTriplets(t.begin(), t.end());
    }
    CoreResult out;
    out.x = Vec::Zero(n);
    out.y = Vec::Zero(me);
    out.z = Vec::Zero(m);
    out.s = Vec::Zero(m);

    // Starting point from the least-squares problem with W = I.
    Vec x, y, z, s;
    {
        KktSolver kkt(SpMat(pq + gt * p.g), p.a);
        if (!kkt.ok()) return out;
        Vec rhs(n + me);
        rhs.head(n) = -p.c + gt * p.h;
        rhs.tail(me) = p.b;
        const Vec sol = kkt.solve(rhs);
        x = sol.head(n);
        y = sol.tail(me);
        const Vec r = p.g * x - p.h;
        s = push_interior(p, -r);
        z = push_interior(p, r);
    }
    const Vec e = identity_element(p);

    // The best iterate by KKT merit is kept: near a degenerate optimum the
    // duals can drift after the primal has settled.
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    for (int it = 0;; ++it) {
        const Vec rx = p.q.cwiseProduct(x) + p.c + at * y + gt * z;
        const Vec ry = p.a * x - p.b;
        const Vec rz = p.g * x + s - p.h;
        const double mu = m ? s.dot(z) / p.degree() : 0.0;
        const double pres = std::max(inf_norm(ry), inf_norm(rz)), dres = inf_norm(rx);
        const double merit = std::max({pres, dres, mu});
        if (!std::isfinite(merit)) return out;
        if (merit < best) {
            best = merit;
            since_best = 0;
            out.x = x;
            out.y = y;
            out.z = z;
            out.s = s;
            out.pres = pres;
            out.dres = dres;
            out.comp = mu;
        } else {
            ++since_best;
        }
        out.iterations = it;
        if (merit <= opts.tol) {
            out.converged = true;
            return out;
        }
        if (it >= opts.max_iter || since_best >= 8) return out;

        const Scaling sc = nt_scaling(p, s, z);
        const SpMat winv2 = inverse_square(p, sc);
        KktSolver kkt(SpMat(pq + gt * winv2 * p.g), p.a);
        if (!kkt.ok()) return out;

        // lambda o (W^{-1} ds + W dz) = rc
        auto solve = [&](const Vec& rc, Vec& dx, Vec& dy, Vec& dz, Vec& ds) {
            const Vec u = jordan_div(p, sc.lambda, rc);
            const Vec wu = apply_w(p, sc, u, false);
            Vec rhs(n + me);
            rhs.head(n) = -rx - gt * (winv2 * (rz + wu));
            rhs.tail(me) = -ry;
            const Vec sol = kkt.solve(rhs);
            dx = sol.head(n);
            dy = sol.tail(me);
            dz = winv2 * (p.g * dx + rz + wu);
            ds = -rz - p.g * dx;
        };

        Vec dx, dy, dz, ds;
        solve(-jordan(p, sc.lambda, sc.lambda), dx, dy, dz, ds);
        const double a_aff = std::min(max_step(p, s, ds, 1.0), max_step(p, z, dz, 1.0));
        const double mu_aff = m ? (s + a_aff * ds).dot(z + a_aff * dz) / p.degree() : 0.0;
        const double sigma = mu > 0.0 ? std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0) : 0.0;

        const Vec ds_t = apply_w(p, sc, ds, true), dz_t = apply_w(p, sc, dz, false);
        const Vec rc = -jordan(p, sc.lambda, sc.lambda) - jordan(p, ds_t, dz_t) + sigma * mu * e;
        solve(rc, dx, dy, dz, ds);
        if (!dx.allFinite() || !dy.allFinite() || !dz.allFinite() || !ds.allFinite()) return out;
        const double alpha = std::min(1.0, 0.99 * std::min(max_step(p, s, ds, 1e300), max_step(p, z, dz, 1e300)));
        if (!(alpha > 1e-14)) return out;
        x += alpha * dx;
        y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
    }
}

}  // namespace

namespace {

Vec row_inf_norms(const SpMat& mat) {
    Vec r = Vec::Zero(mat.rows());
    for (Eigen::Index col = 0; col < mat.outerSize(); ++col)
        for (SpMat::InnerIterator it(mat, col); it; ++it) r[it.row()] = std::max(r[it.row()], std::abs(it.value()));
    return r;
}

// Objective scaled by its largest coefficient, linear rows by their infinity
// norm, balls |x_S| <= r written as the cone block (1, x_S / r).
struct ScaledProgram {
    ConeProgram cone;
    double obj_scale = 1.0;
    Vec eq_scale, lin_scale;
};

ScaledProgram build_cone(const ConvexProblem& prob) {
    ScaledProgram sp;
    ConeProgram& p = sp.cone;
    p.n = prob.n;
    if (prob.q_diag.size()) sp.obj_scale = std::max(sp.obj_scale, inf_norm(prob.q_diag));
    if (prob.c.size()) sp.obj_scale = std::max(sp.obj_scale, inf_norm(prob.c));
    p.q = prob.q_diag / sp.obj_scale;
    p.c = prob.c / sp.obj_scale;

    sp.eq_scale = row_inf_norms(prob.a_eq);
    for (Eigen::Index i = 0; i < sp.eq_scale.size(); ++i) sp.eq_scale[i] = sp.eq_scale[i] > 0.0 ? 1.0 / sp.eq_scale[i] : 1.0;
    p.a = sp.eq_scale.asDiagonal() * prob.a_eq;
    p.b = sp.eq_scale.cwiseProduct(prob.b_eq);

    const Eigen::Index ml = prob.g_lin.rows();
    sp.lin_scale = row_inf_norms(prob.g_lin);
    for (Eigen::Index i = 0; i < ml; ++i) sp.lin_scale[i] = sp.lin_scale[i] > 0.0 ? 1.0 / sp.lin_scale[i] : 1.0;

    Eigen::Index rows = ml;
    for (const auto& ball : prob.balls) rows += 1 + static_cast<Eigen::Index>(ball.vars.size());
    std::vector<Trip> t;
    for (Eigen::Index col = 0; col < prob.g_lin.outerSize(); ++col)
        for (SpMat::InnerIterator it(prob.g_lin, col); it; ++it) t.emplace_back(it.row(), it.col(), it.value() * sp.lin_scale[it.row()]);
    p.h = Vec::Zero(rows);
    p.h.head(ml) = sp.lin_scale.cwiseProduct(prob.h_lin);
    p.l = ml;
    Eigen::Index off = ml;
    for (const auto& ball : prob.balls) {
        p.h[off] = 1.0;
        for (std::size_t j = 0; j < ball.vars.size(); ++j)
            t.emplace_back(off + 1 + static_cast<Eigen::Index>(j), ball.vars[j], -1.0 / ball.radius);
        const auto k = 1 + static_cast<Eigen::Index>(ball.vars.size());
        p.socs.push_back(k);
        off += k;
    }
    p.g.resize(rows, prob.n);
    p.g.setFromTriplets(t.begin(), t.end());
    return sp;
}

// min t  s.t.  A x = b,  G x + s = h + t e,  t >= -1
ConeProgram phase_one(const ConeProgram& p) {
    ConeProgram f;
    f.n = p.n + 1;
    f.q = Vec::Zero(f.n);
    f.c = Vec::Zero(f.n);
    f.c[p.n] = 1.0;
    std::vector<Trip> t;
    for (Eigen::Index col = 0; col < p.a.outerSize(); ++col)
        for (SpMat::InnerIterator it(p.a, col); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    f.a.resize(p.a.rows(), f.n);
    f.a.setFromTriplets(t.begin(), t.end());
    f.b = p.b;

    // Linear rows first (the new bound row goes last among them), then cones.
    t.clear();
    const Vec e = identity_element(p);
    f.l = p.l + 1;
    f.socs = p.socs;
    f.h.resize(p.m() + 1);
    auto map_row = [&](Eigen::Index r) { return r < p.l ? r : r + 1; };
    for (Eigen::Index col = 0; col < p.g.outerSize(); ++col)
        for (SpMat::InnerIterator it(p.g, col); it; ++it) t.emplace_back(map_row(it.row()), it.col(), it.value());
    for (Eigen::Index r = 0; r < p.m(); ++r) {
        f.h[map_row(r)] = p.h[r];
        if (e[r] != 0.0) t.emplace_back(map_row(r), p.n, -1.0);
    }
    t.emplace_back(p.l, p.n, -1.0);
    f.h[p.l] = 1.0;
    f.g.resize(p.m() + 1, f.n);
    f.g.setFromTriplets(t.begin(), t.end());
    return f;
}

}  // namespace

ConvexProblem::ConvexProblem(Eigen::Index n_vars)
    : n(n_vars),
      q_diag(Eigen::VectorXd::Zero(n_vars)),
      c(Eigen::VectorXd::Zero(n_vars)),
      a_eq(0, n_vars),
      b_eq(0),
      g_lin(0, n_vars),
      h_lin(0) {}

double ConvexProblem::objective(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(q_diag.cwiseProduct(x)) + c.dot(x) + c0;
}

double ConvexProblem::max_violation(const Eigen::VectorXd& x) const {
    double v = 0.0;
    if (a_eq.rows()) v = std::max(v, inf_norm(a_eq * x - b_eq));
    if (g_lin.rows()) v = std::max(v, (g_lin * x - h_lin).maxCoeff());
    for (const auto& ball : balls) {
        double s = 0.0;
        for (auto i : ball.vars) s += x[i] * x[i];
        v = std::max(v, std::sqrt(s) - ball.radius);
    }
    return std::max(v, 0.0);
}

Eigen::Index RowBuilder::add(const std::vector<std::pair<Eigen::Index, double>>& terms, double rhs) {
    const auto row = static_cast<Eigen::Index>(rhs_.size());
    for (const auto& [col, val] : terms) {
        if (col < 0 || col >= n_cols_) throw std::out_of_range("RowBuilder: column out of range");
        if (val != 0.0) triplets_.emplace_back(row, col, val);
    }
    rhs_.push_back(rhs);
    return row;
}

Eigen::SparseMatrix<double> RowBuilder::matrix() const {
    Eigen::SparseMatrix<double> m(rows(), n_cols_);
    m.setFromTriplets(triplets_.begin(), triplets_.end());
    return m;
}

Eigen::VectorXd RowBuilder::rhs() const {
    return Eigen::Map<const Eigen::VectorXd>(rhs_.data(), static_cast<Eigen::Index>(rhs_.size()));
}

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::MaxIter: return "MaxIter";
    }
    return "MaxIter";
}

ConvexSolution solve_convex(const ConvexProblem& prob, const ConvexOptions& opts) {
    for (const auto& ball : prob.balls)
        if (!(ball.radius > 0.0)) throw std::invalid_argument("solve_convex: ball radius must be positive");
    if ((prob.q_diag.array() < 0.0).any()) throw std::invalid_argument("solve_convex: objective must be convex");

    const ScaledProgram sp = build_cone(prob);
    const ConeProgram& p = sp.cone;
    const CoreResult core = cone_qp(p, opts);

    ConvexSolution sol;
    sol.x = core.x;
    sol.iterations = core.iterations;
    sol.primal_residual = core.pres;
    sol.dual_residual = core.dres;
    sol.complementarity = core.comp;
    sol.kkt_residual = std::max({core.pres, core.dres, core.comp});
    sol.objective = prob.objective(core.x);
    // Multipliers of the original problem; a ball's multiplier is the one of
    // |x_S| <= r.
    sol.y_eq = core.y.cwiseProduct(sp.eq_scale) * sp.obj_scale;
    const Eigen::Index ml = prob.g_lin.rows();
    sol.z_lin = core.z.head(ml).cwiseProduct(sp.lin_scale) * sp.obj_scale;
    sol.z_ball.resize(static_cast<Eigen::Index>(prob.balls.size()));
    Eigen::Index off = ml;
    for (std::size_t k = 0; k < prob.balls.size(); ++k) {
        sol.z_ball[static_cast<Eigen::Index>(k)] = core.z[off] * sp.obj_scale;
        const auto& ball = prob.balls[k];
        sol.ball_gradient.push_back(-core.z.segment(off + 1, p.socs[k] - 1) * (sp.obj_scale / ball.radius));
        off += p.socs[k];
    }
    if (core.converged) {
        sol.status = SolveStatus::Optimal;
        return sol;
    }

    const ConeProgram f = phase_one(p);
    const CoreResult feas = cone_qp(f, opts);
    sol.infeasibility = feas.x.size() ? feas.x[p.n] : 0.0;
    const double eq_res = p.a.rows() && feas.x.size() ? inf_norm(p.a * feas.x.head(p.n) - p.b) : 0.0;
    // A uniform violation below the feasibility tolerance is not a certificate.
    const double certify = std::max(10.0 * opts.tol, 1e-6);
    if ((feas.converged && sol.infeasibility > certify) || (!feas.converged && eq_res > certify)) {
        sol.status = SolveStatus::Infeasible;
        if (!feas.converged) sol.infeasibility = std::max(sol.infeasibility, eq_res);
    } else {
        sol.status = SolveStatus::MaxIter;
    }
    return sol;
}

}  // namespace elpf
