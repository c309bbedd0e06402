#include "doctest.h"

#include "elpf/case_io.hpp"
#include "oracles.hpp"

using namespace elpf;
using cd = std::complex<double>;

TEST_CASE("bundled cases have the expected sizes") {
    const auto c5 = load_case("case5");
    CHECK(c5.n_bus() == 5);
    CHECK(c5.n_branch() == 6);
    CHECK(c5.generators.size() == 5);
    CHECK(load_case("case57").n_bus() == 57);
    CHECK(load_case("case118").n_bus() == 118);
    CHECK(c5.buses[c5.slack_index()].kind == BusKind::Slack);
    CHECK(c5.bus_index(4) == 3);
}

TEST_CASE("loads and ratings are converted to per unit") {
    const auto c5 = load_case("case5");
    CHECK(c5.buses[1].p_load == doctest::Approx(3.0));
    CHECK(c5.buses[1].q_load == doctest::Approx(0.9861));
    CHECK(c5.branches[0].s_max == doctest::Approx(4.0));
    CHECK_FALSE(c5.branches[1].rated());
    CHECK(c5.generators[2].p_max == doctest::Approx(5.2));
}

TEST_CASE("semantic errors") {
    auto text = oracle::two_bus_case(0.1, 50);
    SUBCASE("no slack bus") {
        const auto bad = std::string(text).replace(text.find("1 3 0"), 5, "1 2 0");
        try {
            parse_case(bad);
            FAIL("expected an error");
        } catch (const CaseError& e) {
            CHECK(e.kind() == CaseError::Kind::Semantic);
            CHECK(std::string(e.what()).find("no slack bus") != std::string::npos);
        }
    }
    SUBCASE("dangling branch endpoint") {
        const auto bad = std::string(text).replace(text.find("  1 2 0 0.1"), 11, "  1 7 0 0.1");
        CHECK_THROWS_AS(parse_case(bad), CaseError);
    }
    SUBCASE("negative quadratic cost") {
        const auto bad = std::string(text).replace(text.find("3 0.01"), 6, "3 -0.01");
        try {
            parse_case(bad);
            FAIL("expected an error");
        } catch (const CaseError& e) {
            CHECK(e.kind() == CaseError::Kind::Semantic);
        }
    }
}

TEST_CASE("malformed matrix row is a syntax error") {
    auto text = oracle::two_bus_case(0.1, 50);
    text.replace(text.find("1 2 0 0.1"), 9, "1 2 0 zz");
    try {
        parse_case(text);
        FAIL("expected an error");
    } catch (const CaseError& e) {
        CHECK(e.kind() == CaseError::Kind::Syntax);
    }
    CHECK_THROWS_AS(load_case("/nonexistent/case.m"), InputError);
}

TEST_CASE("two-bus admittance by hand") {
    auto c = parse_case(oracle::two_bus_case(0.1, 50));
    auto y = build_admittance(c);
    CHECK(std::abs(y(0, 0) - cd(0, -10)) < 1e-12);
    CHECK(std::abs(y(1, 1) - cd(0, -10)) < 1e-12);
    CHECK(std::abs(y(0, 1) - cd(0, 10)) < 1e-12);
    CHECK(std::abs(y(1, 0) - cd(0, 10)) < 1e-12);

    c.buses[1].b_shunt = 0.3;
    c.branches[0].total_shunt_susceptance = 0.2;
    const auto y2 = build_admittance(c);
    CHECK(std::abs(y2(0, 0) - y(0, 0) - cd(0, 0.1)) < 1e-12);
    CHECK(std::abs(y2(1, 1) - y(1, 1) - cd(0, 0.4)) < 1e-12);
    CHECK(std::abs(y2(0, 1) - y(0, 1)) < 1e-12);
}

TEST_CASE("matches the independently assembled admittance") {
    for (const char* name : {"case5", "case57", "case118"}) {
        const auto c = load_case(name);
        CHECK((build_admittance(c) - oracle::admittance(c)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("case5 admittance is symmetric and rows sum to shunts") {
    const auto c = load_case("case5");
    for (const auto& br : c.branches) {
        REQUIRE(br.phase_shift == 0.0);
        REQUIRE(br.tap_ratio == 1.0);
    }
    const auto y = build_admittance(c);
    CHECK((y - y.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::VectorXcd shunt = Eigen::VectorXcd::Zero(5);
    for (std::size_t i = 0; i < 5; ++i) shunt(i) = cd(c.buses[i].g_shunt, c.buses[i].b_shunt);
    for (const auto& br : c.branches) {
        shunt(br.from) += cd(0, br.total_shunt_susceptance / 2);
        shunt(br.to) += cd(0, br.total_shunt_susceptance / 2);
    }
    CHECK((y.rowwise().sum() - shunt).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("JSON round trip") {
    for (const char* name : {"case5", "case57", "case118"}) {
        const auto c = load_case(name);
        const auto back = parse_case_json(case_to_json(c));
        CHECK(back == c);
        CHECK(parse_case(case_to_json(c)) == c);
    }
}

TEST_CASE("generators kept distinct per bus") {
    const auto c = load_case("case5");
    const auto by_bus = c.generators_by_bus();
    CHECK(by_bus[0].size() == 2);
    CHECK(c.generators[0].cost != c.generators[1].cost);
}
