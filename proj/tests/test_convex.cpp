#include "doctest.h"

#include <random>

#include "elpf/convex.hpp"

using namespace elpf;

namespace {

ConvexProblem make(Eigen::Index n, const Eigen::VectorXd& q, const Eigen::VectorXd& c) {
    ConvexProblem p(n);
    p.q_diag = q;
    p.c = c;
    return p;
}

/// Brute-force active-set enumeration for min 1/2 x'diag(q)x + c'x, Gx <= h.
Eigen::VectorXd active_set_oracle(const Eigen::VectorXd& q, const Eigen::VectorXd& c, const Eigen::MatrixXd& g,
                                  const Eigen::VectorXd& h) {
    const auto n = q.size(), m = g.rows();
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x;
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<Eigen::Index> act;
        for (Eigen::Index i = 0; i < m; ++i)
            if (mask & (1u << i)) act.push_back(i);
        const auto k = static_cast<Eigen::Index>(act.size());
        if (k > n) continue;
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
        Eigen::VectorXd rhs(n + k);
        kkt.topLeftCorner(n, n) = q.asDiagonal();
        rhs.head(n) = -c;
        for (Eigen::Index r = 0; r < k; ++r) {
            kkt.block(n + r, 0, 1, n) = g.row(act[r]);
            kkt.block(0, n + r, n, 1) = g.row(act[r]).transpose();
            rhs(n + r) = h(act[r]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
        if (lu.rank() < n + k) continue;
        const Eigen::VectorXd sol = lu.solve(rhs);
        const Eigen::VectorXd x = sol.head(n);
        if ((g * x - h).maxCoeff() > 1e-9 || (k && sol.tail(k).minCoeff() < -1e-10)) continue;
        const double obj = 0.5 * x.dot(q.asDiagonal() * x) + c.dot(x);
        if (obj < best) best = obj, best_x = x;
    }
    return best_x;
}

}  // namespace

TEST_CASE("row builder and problem evaluation") {
    RowBuilder rb(3);
    CHECK(rb.add({{0, 1.0}, {2, -2.0}}, 4.0) == 0);
    CHECK(rb.add({{1, 3.0}}, -1.0) == 1);
    const Eigen::MatrixXd dense = rb.matrix();
    CHECK(dense(0, 2) == -2.0);
    CHECK(dense(1, 1) == 3.0);
    CHECK(rb.rhs()(1) == -1.0);

    ConvexProblem p = make(3, Eigen::Vector3d(2, 0, 0), Eigen::Vector3d(1, 1, 1));
    p.c0 = 5;
    p.g_lin = rb.matrix();
    p.h_lin = rb.rhs();
    p.balls.push_back({{0, 1}, 1.0});
    const Eigen::Vector3d x(1, 1, 0);
    CHECK(p.objective(x) == doctest::Approx(1 + 2 + 5));
    CHECK(p.max_violation(x) == doctest::Approx(4.0));
    CHECK(p.n_ineq() == 3);
}

TEST_CASE("single generator serving a demand dispatches exactly the demand") {
    // cost 10 p + 0.5 p^2, 0 <= p <= 10, demand 3 enters as p >= 3.
    ConvexProblem p = make(1, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 10.0));
    RowBuilder rb(1);
    rb.add({{0, -1.0}}, -3.0);
    rb.add({{0, 1.0}}, 10.0);
    rb.add({{0, -1.0}}, 0.0);
    p.g_lin = rb.matrix();
    p.h_lin = rb.rhs();
    const auto s = solve_convex(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.x(0) == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(s.z_lin(0) == doctest::Approx(13.0).epsilon(1e-6));
    CHECK(s.objective == doctest::Approx(34.5).epsilon(1e-8));
}

TEST_CASE("linear inequalities agree with active-set enumeration") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3, m = 7;
        Eigen::VectorXd q(n), c(n), h(m);
        Eigen::MatrixXd g(m, n);
        for (int i = 0; i < n; ++i) q(i) = 0.5 + std::abs(u(rng)), c(i) = 3 * u(rng);
        for (int r = 0; r < m; ++r) {
            for (int j = 0; j < n; ++j) g(r, j) = u(rng);
            h(r) = 0.2 + std::abs(u(rng));  // x = 0 is strictly feasible
        }
        ConvexProblem p = make(n, q, c);
        p.g_lin = g.sparseView();
        p.h_lin = h;
        const auto s = solve_convex(p);
        REQUIRE(s.status == SolveStatus::Optimal);
        const auto ref = active_set_oracle(q, c, g, h);
        REQUIRE(ref.size() == n);
        CHECK((s.x - ref).cwiseAbs().maxCoeff() < 1e-5);
        CHECK(s.objective == doctest::Approx(p.objective(ref)).epsilon(1e-7));
        CHECK(s.kkt_residual <= 1e-8);
    }
}

TEST_CASE("ball constraint: linear objective lands on the boundary") {
    ConvexProblem p = make(2, Eigen::Vector2d::Zero(), Eigen::Vector2d(-1, -1));
    p.balls.push_back({{0, 1}, 2.0});
    const auto s = solve_convex(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.x(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-7));
    CHECK(s.x(1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-7));
    // Stationarity: c + z x / r^2 = 0.
    CHECK(s.z_ball(0) * s.x(0) / 4.0 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("equalities, inequalities and balls satisfy the KKT conditions") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    const int n = 6;
    Eigen::VectorXd q(n), c(n);
    for (int i = 0; i < n; ++i) q(i) = i % 2 ? 0.0 : 1.0 + std::abs(u(rng)), c(i) = 2 * u(rng);
    ConvexProblem p = make(n, q, c);
    RowBuilder eq(n), in(n);
    eq.add({{0, 1.0}, {1, 1.0}, {2, 1.0}}, 0.5);
    for (int r = 0; r < 5; ++r) {
        std::vector<std::pair<Eigen::Index, double>> t;
        for (int j = 0; j < n; ++j) t.emplace_back(j, u(rng));
        in.add(t, 0.5 + std::abs(u(rng)));
    }
    p.a_eq = eq.matrix();
    p.b_eq = eq.rhs();
    p.g_lin = in.matrix();
    p.h_lin = in.rhs();
    p.balls.push_back({{0, 1, 2}, 1.0});
    p.balls.push_back({{3, 4}, 0.7});
    p.balls.push_back({{5}, 0.4});
    const auto s = solve_convex(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(p.max_violation(s.x) <= 1e-7);

    Eigen::VectorXd grad = q.cwiseProduct(s.x) + c + Eigen::MatrixXd(p.a_eq).transpose() * s.y_eq +
                           Eigen::MatrixXd(p.g_lin).transpose() * s.z_lin;
    for (std::size_t k = 0; k < p.balls.size(); ++k) {
        const auto& b = p.balls[k];
        for (std::size_t j = 0; j < b.vars.size(); ++j) {
            const auto v = b.vars[j];
            const double w = s.ball_gradient[k](static_cast<Eigen::Index>(j));
            grad(v) += w;
            CHECK(w == doctest::Approx(s.z_ball(static_cast<Eigen::Index>(k)) * s.x(v) / (b.radius * b.radius)).epsilon(1e-3).scale(1.0));
        }
    }
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(s.z_lin.minCoeff() >= -1e-9);
    CHECK(s.z_ball.minCoeff() >= -1e-9);
    const Eigen::VectorXd slack = p.h_lin - p.g_lin * s.x;
    CHECK(s.z_lin.dot(slack) < 1e-6);
    for (std::size_t k = 0; k < p.balls.size(); ++k) {
        double nrm = 0;
        for (auto v : p.balls[k].vars) nrm += s.x(v) * s.x(v);
        CHECK(s.z_ball(static_cast<Eigen::Index>(k)) * (p.balls[k].radius - std::sqrt(nrm)) < 1e-6);
    }
}

TEST_CASE("contradictory constraints are certified infeasible") {
    ConvexProblem p = make(1, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Zero(1));
    RowBuilder rb(1);
    rb.add({{0, 1.0}}, -1.0);
    rb.add({{0, -1.0}}, -1.0);
    p.g_lin = rb.matrix();
    p.h_lin = rb.rhs();
    const auto s = solve_convex(p);
    CHECK(s.status == SolveStatus::Infeasible);
    CHECK(s.infeasibility == doctest::Approx(1.0).epsilon(1e-5));

    ConvexProblem b = make(2, Eigen::Vector2d::Ones(), Eigen::Vector2d::Zero());
    RowBuilder e(2);
    e.add({{0, 1.0}}, 3.0);
    b.a_eq = e.matrix();
    b.b_eq = e.rhs();
    b.balls.push_back({{0, 1}, 1.0});
    CHECK(solve_convex(b).status == SolveStatus::Infeasible);
}

TEST_CASE("iteration cap is reported") {
    ConvexProblem p = make(2, Eigen::Vector2d::Ones(), Eigen::Vector2d(1, -1));
    p.balls.push_back({{0, 1}, 0.5});
    ConvexOptions o;
    o.max_iter = 1;
    CHECK(solve_convex(p, o).status == SolveStatus::MaxIter);
    CHECK(solve_convex(p).status == SolveStatus::Optimal);
    CHECK(to_string(SolveStatus::Infeasible) == "Infeasible");
}
