#include "doctest.h"

#include "elpf/linmodel.hpp"
#include "oracles.hpp"

using namespace elpf;

TEST_CASE("two-point line") {
    Eigen::MatrixXd x(2, 1), y(2, 1);
    x << 0, 1;
    y << 1, 3;
    const auto m = fit_ols(x, y);
    CHECK(m.coeffs(0, 0) == doctest::Approx(2.0));
    CHECK(m.intercept(0) == doctest::Approx(1.0));
    CHECK(m.predict(Eigen::VectorXd::Constant(1, 2.0))(0) == doctest::Approx(5.0));

    LinearModel z;
    z.coeffs = Eigen::MatrixXd::Zero(2, 3);
    z.intercept = Eigen::Vector2d(4, -1);
    CHECK(z.predict(Eigen::Vector3d(1, 2, 3)) == z.intercept);
    CHECK_THROWS_AS(z.predict(Eigen::Vector2d(1, 2)), InputError);
}

TEST_CASE("exact affine data is recovered") {
    std::mt19937_64 rng(11);
    const Eigen::MatrixXd x = oracle::random_design(rng, 40, 6, 6, false);
    const Eigen::MatrixXd a0 = Eigen::MatrixXd::Random(3, 6);
    const Eigen::VectorXd b0 = Eigen::VectorXd::Random(3);
    const Eigen::MatrixXd y = (x * a0.transpose()).rowwise() + b0.transpose();
    const auto m = fit_ols(x, y);
    CHECK((m.coeffs - a0).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((m.intercept - b0).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank-deficient designs match the pseudoinverse oracle") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 2 + trial, m = 15 + 10 * trial, rank = 1 + trial / 2;
        const Eigen::MatrixXd x = oracle::random_design(rng, m, d, rank, trial % 2 == 0);
        const Eigen::MatrixXd y = Eigen::MatrixXd::Random(m, 3);
        const auto fit = fit_ols(x, y);
        CHECK((fit.predict_rows(x) - oracle::pinv_fitted(x, y)).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(fit.all_finite());
    }
}

TEST_CASE("normal equations hold, with and without ridge") {
    std::mt19937_64 rng(5);
    const Eigen::MatrixXd x = oracle::random_design(rng, 50, 5, 5, false);
    const Eigen::MatrixXd y = Eigen::MatrixXd::Random(50, 2);
    for (double lambda : {0.0, 0.3}) {
        const auto m = fit_ols(x, y, lambda);
        const Eigen::MatrixXd resid = y - m.predict_rows(x);
        CHECK((x.transpose() * resid - lambda * m.coeffs.transpose()).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(resid.colwise().sum().cwiseAbs().maxCoeff() < 1e-9);
    }
    CHECK(fit_ols(x, y, 10.0).coeffs.norm() <= fit_ols(x, y, 0.0).coeffs.norm());
}

TEST_CASE("label shift moves only the intercept") {
    std::mt19937_64 rng(9);
    const Eigen::MatrixXd x = oracle::random_design(rng, 30, 4, 3, true);
    const Eigen::MatrixXd y = Eigen::MatrixXd::Random(30, 2);
    const auto a = fit_ols(x, y);
    const auto b = fit_ols(x, y.array() + 2.5);
    CHECK((a.coeffs - b.coeffs).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((b.intercept - a.intercept).array().abs().maxCoeff() == doctest::Approx(2.5));
}

TEST_CASE("predict is affine") {
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd x = oracle::random_design(rng, 30, 4, 4, false);
    const auto m = fit_ols(x, Eigen::MatrixXd::Random(30, 3));
    const Eigen::VectorXd x1 = Eigen::VectorXd::Random(4), x2 = Eigen::VectorXd::Random(4);
    const double al = 0.3;
    CHECK((m.predict(al * x1 + (1 - al) * x2) - (al * m.predict(x1) + (1 - al) * m.predict(x2))).norm() < 1e-12);
}

TEST_CASE("input checks") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 2), y = Eigen::MatrixXd::Random(5, 1);
    CHECK_THROWS_AS(fit_ols(x, Eigen::MatrixXd::Random(4, 1)), InputError);
    CHECK_THROWS_AS(fit_ols(x.topRows(1), y.topRows(1)), InputError);
    x(2, 1) = std::nan("");
    CHECK_THROWS_AS(fit_ols(x, y), InputError);
    CHECK_THROWS_AS(fit_ols(Eigen::MatrixXd::Random(5, 2), y, -1.0), InputError);
}

TEST_CASE("degree knob expands elementwise powers") {
    Eigen::MatrixXd x(4, 1), y(4, 1);
    x << 0, 1, 2, 3;
    y = x.array().square() * 2 + 1;
    const auto m = fit_ols(x, y, 0.0, 2);
    CHECK(m.predict(Eigen::VectorXd::Constant(1, 4.0))(0) == doctest::Approx(33.0));
    CHECK(expand_polynomial(x, 2).cols() == 2);
}

TEST_CASE("branch models on case5") {
    const auto c = load_case("case5");
    SamplerConfig s;
    s.n_samples = 60;
    const auto ds = generate(c, s);
    const auto models = fit_branch_models(ds, c, 0.0);
    REQUIRE(models.size() == 6);
    for (std::size_t l = 0; l < models.size(); ++l) {
        CHECK(models[l].coeffs.rows() == 2);
        CHECK(models[l].coeffs.cols() == 4);
        const auto& fm = models[l].feature_map;
        CHECK(fm.from == c.branches[l].from);
        const Eigen::MatrixXd xl = branch_design(ds, fm);
        CHECK((models[l].predict_rows(xl) - oracle::pinv_fitted(xl, branch_labels(ds, l))).cwiseAbs().maxCoeff() < 1e-8);
    }
    const auto all = fit_branch_models(ds, c, 0.0, FeatureMap::Kind::AllBuses);
    CHECK(all[0].coeffs.cols() == 10);

    const auto bus = fit_ols(ds.features, ds.bus_p);
    const Eigen::MatrixXd resid = bus.predict_rows(ds.features) - ds.bus_p;
    const double rms = std::sqrt(resid.squaredNorm() / resid.size());
    CHECK((bus.predict(ds.features.row(0).transpose()) - ds.bus_p.row(0).transpose()).cwiseAbs().maxCoeff() < 10 * rms + 1e-12);
}

TEST_CASE("identical endpoint voltages give zero fitted flow on a lossless symmetric branch") {
    // Labels follow the exact lossless flow P = (f_i e_j - e_i f_j)/x, which
    // vanishes when both ends carry the same voltage.
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    Eigen::MatrixXd x(80, 4), y(80, 2);
    for (int m = 0; m < 80; ++m) {
        const double ei = 1 + u(rng), fi = u(rng), ej = 1 + u(rng), fj = u(rng);
        x.row(m) << ei, fi, ej, fj;
        y(m, 0) = (fi * ej - ei * fj) / 0.1;
        y(m, 1) = (ei * ei + fi * fi - ei * ej - fi * fj) / 0.1;
    }
    const auto fit = fit_ols(x, y);
    CHECK(std::abs(fit.predict(Eigen::Vector4d(1, 0, 1, 0))(0)) < 1e-3);
}

TEST_CASE("model JSON round trip") {
    std::mt19937_64 rng(8);
    const Eigen::MatrixXd x = oracle::random_design(rng, 20, 4, 4, false);
    auto m = fit_ols(x, Eigen::MatrixXd::Random(20, 2), 0.01);
    m.feature_map = FeatureMap::endpoints(1, 3);
    const auto back = model_from_json(model_to_json(m));
    CHECK(back.coeffs == m.coeffs);
    CHECK(back.intercept == m.intercept);
    CHECK(back.feature_map == m.feature_map);
    CHECK(back.ridge_lambda == m.ridge_lambda);
}
