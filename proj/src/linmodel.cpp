#include "elpf/linmodel.hpp"

#include <algorithm>
#include <cmath>

namespace elpf {

namespace {

// Pivots of the centered design below kRelativeRank x the largest pivot, or
// below kAbsoluteRank x (data magnitude) x sqrt(M), count as zero. Centering
// leaves O(eps) noise in constant columns; without the floor that noise would
// be fit as a real direction with enormous coefficients.
constexpr double kRelativeRank = 1e-12;
constexpr double kAbsoluteRank = 1e-13;

void check_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) throw InputError(std::string("fit_ols: non-finite values in ") + what);
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(m.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(r);
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j, Eigen::Index cols_if_empty) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : cols_if_empty;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j.at(i).size()) != cols) throw InputError("model JSON: ragged coefficient matrix");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
    }
    return m;
}

}  // namespace

std::vector<Eigen::Index> FeatureMap::columns(Eigen::Index n_bus) const {
    if (kind == Kind::AllBuses) {
        std::vector<Eigen::Index> all(static_cast<std::size_t>(2 * n_bus));
        for (Eigen::Index i = 0; i < 2 * n_bus; ++i) all[static_cast<std::size_t>(i)] = i;
        return all;
    }
    return {2 * from, 2 * from + 1, 2 * to, 2 * to + 1};
}

Eigen::MatrixXd FeatureMap::select(const Eigen::MatrixXd& full) const {
    if (kind == Kind::AllBuses) return full;
    const auto cols = columns(full.cols() / 2);
    Eigen::MatrixXd out(full.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = full.col(cols[k]);
    return out;
}

Eigen::VectorXd FeatureMap::select(const Eigen::Ref<const Eigen::VectorXd>& full) const {
    if (kind == Kind::AllBuses) return full;
    const auto cols = columns(full.size() / 2);
    Eigen::VectorXd out(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out[static_cast<Eigen::Index>(k)] = full[cols[k]];
    return out;
}

Eigen::MatrixXd expand_polynomial(const Eigen::MatrixXd& x, int degree) {
    if (degree < 1) throw InputError("polynomial degree must be >= 1");
    if (degree == 1) return x;
    Eigen::MatrixXd out(x.rows(), x.cols() * degree);
    Eigen::MatrixXd power = x;
    for (int p = 0; p < degree; ++p) {
        out.middleCols(p * x.cols(), x.cols()) = power;
        power = power.cwiseProduct(x);
    }
    return out;
}

Eigen::VectorXd LinearModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != inputs()) throw InputError("predict: dimension mismatch");
    if (degree == 1) return coeffs * x + intercept;
    const Eigen::MatrixXd phi = expand_polynomial(x.transpose(), degree);
    return coeffs * phi.transpose() + intercept;
}

Eigen::MatrixXd LinearModel::predict_rows(const Eigen::MatrixXd& x) const {
    if (x.cols() != inputs()) throw InputError("predict: dimension mismatch");
    Eigen::MatrixXd out = (degree == 1 ? x : expand_polynomial(x, degree)) * coeffs.transpose();
    out.rowwise() += intercept.transpose();
    return out;
}

bool LinearModel::all_finite() const { return coeffs.allFinite() && intercept.allFinite(); }

LeastSquaresSolver::LeastSquaresSolver(const Eigen::MatrixXd& x, double ridge_lambda)
    : rows_(x.rows()), cols_(x.cols()), lambda_(ridge_lambda) {
    if (rows_ < 2) throw InputError("fit_ols: need at least 2 samples");
    if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) throw InputError("fit_ols: ridge_lambda must be >= 0");
    check_finite(x, "X");
    x_mean_ = x.colwise().mean();
    Eigen::MatrixXd xc = x.rowwise() - x_mean_;
    if (lambda_ == 0.0) {
        cod_.setThreshold(kRelativeRank);
        cod_.compute(xc);
        const double floor =
            kAbsoluteRank * std::max(1.0, x.cwiseAbs().maxCoeff()) * std::sqrt(static_cast<double>(rows_));
        const double max_pivot = cod_.maxPivot();
        if (max_pivot * kRelativeRank < floor) {
            cod_.setThreshold(max_pivot > floor ? floor / max_pivot : 1.0);
            cod_.compute(xc);
        }
        rank_ = cod_.rank();
        if (rank_ > 0) {
            const Eigen::VectorXd d = cod_.matrixQTZ().diagonal().head(rank_).cwiseAbs();
            condition_ = d.maxCoeff() / d.minCoeff();
        }
    } else {
        Eigen::MatrixXd aug(rows_ + cols_, cols_);
        aug.topRows(rows_) = xc;
        aug.bottomRows(cols_) = std::sqrt(lambda_) * Eigen::MatrixXd::Identity(cols_, cols_);
        ridge_qr_.compute(aug);
        rank_ = cols_;
        const Eigen::VectorXd d = ridge_qr_.matrixQR().diagonal().cwiseAbs();
        condition_ = d.maxCoeff() / d.minCoeff();
    }
}

LinearModel LeastSquaresSolver::fit(const Eigen::MatrixXd& y) const {
    if (y.rows() != rows_) throw InputError("fit_ols: X and Y row counts differ");
    check_finite(y, "Y");
    const Eigen::RowVectorXd y_mean = y.colwise().mean();
    const Eigen::MatrixXd yc = y.rowwise() - y_mean;
    Eigen::MatrixXd beta;  // d x k
    if (lambda_ == 0.0) {
        beta = cod_.solve(yc);
    } else {
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(rows_ + cols_, y.cols());
        rhs.topRows(rows_) = yc;
        beta = ridge_qr_.solve(rhs);
    }
    LinearModel m;
    m.coeffs = beta.transpose();
    m.intercept = (y_mean - x_mean_ * beta).transpose();
    m.ridge_lambda = lambda_;
    return m;
}

LinearModel fit_ols(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double ridge_lambda, int degree) {
    if (x.rows() != y.rows()) throw InputError("fit_ols: X and Y row counts differ");
    const Eigen::MatrixXd phi = expand_polynomial(x, degree);
    LinearModel m = LeastSquaresSolver(phi, ridge_lambda).fit(y);
    m.degree = degree;
    return m;
}

Eigen::MatrixXd branch_design(const Dataset& ds, const FeatureMap& map) { return map.select(ds.features); }

Eigen::MatrixXd branch_labels(const Dataset& ds, std::size_t branch) {
    Eigen::MatrixXd y(ds.branch_p.rows(), 2);
    y.col(0) = ds.branch_p.col(static_cast<Eigen::Index>(branch));
    y.col(1) = ds.branch_q.col(static_cast<Eigen::Index>(branch));
    return y;
}

FeatureMap branch_feature_map(const NetworkCase& c, std::size_t branch, FeatureMap::Kind kind) {
    if (kind == FeatureMap::Kind::AllBuses) return FeatureMap::all_buses();
    const auto& br = c.branches.at(branch);
    return FeatureMap::endpoints(br.from, br.to);
}

std::vector<LinearModel> fit_branch_models(const Dataset& ds, const NetworkCase& c, double ridge_lambda,
                                           FeatureMap::Kind kind) {
    if (ds.branch_p.cols() != static_cast<Eigen::Index>(c.n_branch()) ||
        ds.features.cols() != static_cast<Eigen::Index>(2 * c.n_bus()))
        throw InputError("fit_branch_models: dataset columns do not match the case topology");
    std::vector<LinearModel> out;
    out.reserve(c.n_branch());
    for (std::size_t l = 0; l < c.n_branch(); ++l) {
        const FeatureMap map = branch_feature_map(c, l, kind);
        LinearModel m = fit_ols(branch_design(ds, map), branch_labels(ds, l), ridge_lambda);
        m.feature_map = map;
        out.push_back(std::move(m));
    }
    return out;
}

nlohmann::json model_to_json(const LinearModel& m) {
    nlohmann::json fm;
    if (m.feature_map.kind == FeatureMap::Kind::AllBuses) {
        fm = {{"kind", "all_buses"}};
    } else {
        fm = {{"kind", "branch_endpoints"}, {"from", m.feature_map.from}, {"to", m.feature_map.to}};
    }
    return {{"feature_map", fm},
            {"ridge_lambda", m.ridge_lambda},
            {"degree", m.degree},
            {"coeffs", matrix_json(m.coeffs)},
            {"intercept", std::vector<double>(m.intercept.data(), m.intercept.data() + m.intercept.size())}};
}

LinearModel model_from_json(const nlohmann::json& j) {
    LinearModel m;
    try {
        const auto& fm = j.at("feature_map");
        if (fm.at("kind").get<std::string>() == "branch_endpoints") {
            m.feature_map = FeatureMap::endpoints(fm.at("from").get<int>(), fm.at("to").get<int>());
        }
        m.ridge_lambda = j.value("ridge_lambda", 0.0);
        m.degree = j.value("degree", 1);
        m.coeffs = matrix_from(j.at("coeffs"), 0);
        const auto b = j.at("intercept").get<std::vector<double>>();
        m.intercept = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("model JSON: ") + e.what());
    }
    if (m.intercept.size() != m.coeffs.rows()) throw InputError("model JSON: intercept length mismatch");
    return m;
}

}  // namespace elpf
