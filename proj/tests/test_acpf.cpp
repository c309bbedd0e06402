#include "doctest.h"

#include "elpf/acpf.hpp"
#include "oracles.hpp"

using namespace elpf;

TEST_CASE("two-bus closed form") {
    const double x = 0.1, p = 0.5;
    const auto c = parse_case(oracle::two_bus_case(x, 100 * p));
    const auto r = solve_ac(c, AcOptions{1e-12, 30});
    const auto ref = oracle::two_bus_solution(x, p);
    CHECK(r.voltage.e(1) == doctest::Approx(ref.e2).epsilon(1e-12));
    CHECK(r.voltage.f(1) == doctest::Approx(ref.f2).epsilon(1e-12));
    CHECK(std::hypot(r.voltage.e(1), r.voltage.f(1)) == doctest::Approx(0.99874).epsilon(1e-5));
    CHECK(r.max_mismatch < 1e-10);
    CHECK(r.voltage.f(0) == 0.0);
    CHECK(r.voltage.e(0) == 1.0);

    const auto fl = compute_flows(c, r.voltage);
    CHECK(fl.p_flow(0) == doctest::Approx(p).epsilon(1e-10));
    CHECK(fl.q_flow(0) == doctest::Approx(ref.q_from).epsilon(1e-9));
    CHECK(fl.p_inj(1) == doctest::Approx(-p).epsilon(1e-10));
    CHECK(std::abs(fl.p_inj.sum()) < 1e-10);
}

TEST_CASE("analytic Jacobian matches central differences on case5") {
    const auto c = load_case("case5");
    const auto y = build_admittance(c);
    PowerFlowEquations eq(c, y);
    Eigen::VectorXd x = eq.initial_guess();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += u(rng);
    const Eigen::MatrixXd j = eq.jacobian(x);
    const double h = 1e-6;
    Eigen::MatrixXd fd(j.rows(), j.cols());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        fd.col(k) = (eq.mismatch(xp) - eq.mismatch(xm)) / (2 * h);
    }
    CHECK((j - fd).norm() / j.norm() <= 1e-5);
}

TEST_CASE("bundled cases converge at base load") {
    for (const char* name : {"case5", "case57", "case118"}) {
        CAPTURE(name);
        const auto c = load_case(name);
        const auto r = solve_ac(c);
        CHECK(r.max_mismatch <= 1e-8);
        CHECK(r.iterations <= 10);
        const auto fl = compute_flows(c, r.voltage);
        CHECK(fl.p_inj.sum() >= 0.0);
        for (std::size_t i = 0; i < c.n_bus(); ++i) {
            const auto& b = c.buses[i];
            if (b.kind == BusKind::PQ) CHECK(fl.p_inj(i) == doctest::Approx(-b.p_load).epsilon(1e-7));
        }
        const auto inj = scheduled_injections(c);
        for (std::size_t i = 0; i < c.n_bus(); ++i)
            if (c.buses[i].kind == BusKind::PV) CHECK(std::abs(fl.p_inj(i) - inj(i).real()) < 1e-8);
    }
}

TEST_CASE("flows agree with the independent pi-model evaluation") {
    const auto c = load_case("case57");
    const auto r = solve_ac(c);
    const auto fl = compute_flows(c, r.voltage);
    const auto inj = oracle::injections(oracle::admittance(c), r.voltage.phasors());
    CHECK((fl.p_inj - inj.p).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((fl.q_inj - inj.q).cwiseAbs().maxCoeff() < 1e-10);
    for (std::size_t l = 0; l < c.n_branch(); ++l) {
        const auto s = oracle::from_flow(c.branches[l], r.voltage.phasors());
        CHECK(std::abs(fl.p_flow(l) - s.real()) < 1e-10);
        CHECK(std::abs(fl.q_flow(l) - s.imag()) < 1e-10);
    }
}

TEST_CASE("zero injections give a flat profile") {
    auto c = load_case("case5");
    for (auto& b : c.buses) b.p_load = b.q_load = b.g_shunt = b.b_shunt = 0.0;
    for (auto& g : c.generators) g.p_setpoint = 0.0;
    for (auto& br : c.branches) br.total_shunt_susceptance = 0.0;
    const auto r = solve_ac(c);
    for (std::size_t i = 0; i < c.n_bus(); ++i) CHECK(std::hypot(r.voltage.e(i), r.voltage.f(i)) == doctest::Approx(1.0));
    const auto fl = compute_flows(c, r.voltage);
    CHECK(fl.p_flow.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(fl.q_flow.cwiseAbs().maxCoeff() < 1e-9);

    VoltageState flat{Eigen::VectorXd::Ones(5), Eigen::VectorXd::Zero(5)};
    const auto f0 = compute_flows(c, flat);
    CHECK(f0.p_inj.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f0.p_flow.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("deterministic and reports divergence") {
    const auto c = load_case("case118");
    const auto a = solve_ac(c), b = solve_ac(c);
    CHECK(a.voltage.e == b.voltage.e);
    CHECK(a.voltage.f == b.voltage.f);
    try {
        solve_ac(c, AcOptions{1e-8, 1});
        FAIL("expected divergence");
    } catch (const AcDivergenceError& e) {
        CHECK(e.mismatch() > 1e-8);
    }
    auto heavy = parse_case(oracle::two_bus_case(0.1, 900));
    CHECK_THROWS_AS(solve_ac(heavy), ConvergenceError);
}

TEST_CASE("rectangular features interleave e and f") {
    VoltageState v{Eigen::Vector2d(1.0, 0.9), Eigen::Vector2d(0.0, -0.1)};
    const Eigen::VectorXd x = v.interleaved();
    CHECK(x(1) == 0.0);
    CHECK(x(2) == 0.9);
    CHECK(x(3) == -0.1);
    const auto back = VoltageState::from_interleaved(x);
    CHECK(back.e == v.e);
    CHECK(back.f == v.f);
}
