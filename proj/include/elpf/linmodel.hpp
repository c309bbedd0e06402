#pragma once

#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "elpf/case_io.hpp"
#include "elpf/datagen.hpp"

namespace elpf {

/// Which slice of the full feature row [e_1, f_1, ..., e_n, f_n] a model reads.
struct FeatureMap {
    enum class Kind { AllBuses, BranchEndpoints };
    Kind kind = Kind::AllBuses;
    int from = -1;  // internal bus indices, BranchEndpoints only
    int to = -1;

    static FeatureMap all_buses() { return {}; }
    static FeatureMap endpoints(int from, int to) { return {Kind::BranchEndpoints, from, to}; }

    /// Column indices into the full feature row.
    std::vector<Eigen::Index> columns(Eigen::Index n_bus) const;
    Eigen::MatrixXd select(const Eigen::MatrixXd& full) const;
    Eigen::VectorXd select(const Eigen::Ref<const Eigen::VectorXd>& full) const;

    bool operator==(const FeatureMap&) const = default;
};

/// y = A phi(x) + b, where phi stacks x, x^2, ..., x^degree elementwise.
/// With degree 1 the model is the affine map of the power-flow surrogate.
struct LinearModel {
    Eigen::MatrixXd coeffs;     // k x (d * degree)
    Eigen::VectorXd intercept;  // k
    FeatureMap feature_map;
    double ridge_lambda = 0.0;
    int degree = 1;

    Eigen::Index outputs() const { return coeffs.rows(); }
    /// Raw input dimension d (before polynomial expansion).
    Eigen::Index inputs() const { return coeffs.cols() / degree; }

    /// x has `inputs()` entries, already restricted by feature_map.
    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    /// Row-wise predict: (M x d) -> (M x k).
    Eigen::MatrixXd predict_rows(const Eigen::MatrixXd& x) const;
    bool all_finite() const;
};

/// Elementwise powers [X, X.^2, ..., X.^degree].
Eigen::MatrixXd expand_polynomial(const Eigen::MatrixXd& x, int degree);

/// Centered least squares on a fixed design, factorized once and reused for
/// any number of right-hand sides.
///
/// lambda = 0: minimum-norm solution from a complete orthogonal decomposition
/// (column-pivoted QR), so constant or collinear columns are tolerated.
/// lambda > 0: ridge on the coefficients via QR of [Xc; sqrt(lambda) I].
/// The intercept is never penalized.
class LeastSquaresSolver {
  public:
    LeastSquaresSolver(const Eigen::MatrixXd& x, double ridge_lambda);

    /// Coefficients (k x d) and intercept for the label block y (M x k).
    LinearModel fit(const Eigen::MatrixXd& y) const;
    Eigen::Index rank() const { return rank_; }
    /// Ratio of the largest to the smallest retained triangular pivot (1 when rank 0).
    double condition() const { return condition_; }
    Eigen::Index rows() const { return rows_; }
    double ridge_lambda() const { return lambda_; }

  private:
    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
    double lambda_ = 0.0;
    Eigen::Index rank_ = 0;
    double condition_ = 1.0;
    Eigen::RowVectorXd x_mean_;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
    Eigen::HouseholderQR<Eigen::MatrixXd> ridge_qr_;
};

/// Multi-output ordinary (or ridge) least squares. Throws InputError on
/// non-finite data, M < 2, or mismatched row counts.
LinearModel fit_ols(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double ridge_lambda = 0.0, int degree = 1);

/// Design and label blocks of branch l: endpoint voltages (or all buses) and
/// the two columns [P_ij, Q_ij].
Eigen::MatrixXd branch_design(const Dataset& ds, const FeatureMap& map);
Eigen::MatrixXd branch_labels(const Dataset& ds, std::size_t branch);
FeatureMap branch_feature_map(const NetworkCase& c, std::size_t branch, FeatureMap::Kind kind);

/// One 2-output (P_ij, Q_ij) model per branch.
std::vector<LinearModel> fit_branch_models(const Dataset& ds, const NetworkCase& c, double ridge_lambda,
                                           FeatureMap::Kind kind = FeatureMap::Kind::BranchEndpoints);

nlohmann::json model_to_json(const LinearModel& m);
LinearModel model_from_json(const nlohmann::json& j);

}  // namespace elpf
