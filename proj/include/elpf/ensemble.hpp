#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elpf/linmodel.hpp"

namespace elpf {

struct BoostConfig {
    enum class StepMode { Constant, LineSearch };

    std::size_t n_learners = 200;
    StepMode step_mode = StepMode::Constant;
    double theta = 0.1;
    double ridge_lambda = 0.0;

    void validate() const;
};

/// Bootstrap row indices for one member: (member, M, M') -> M' indices in [0, M).
using Resampler = std::function<std::vector<std::size_t>(std::size_t, std::size_t, std::size_t)>;

struct BagConfig {
    std::size_t n_bootstraps = 50;
    std::size_t sample_size = 0;  // M'; 0 means M
    std::uint64_t seed = 1;
    double ridge_lambda = 0.0;
    int jobs = 1;
    Resampler resampler;  // tests may force specific resamples

    void validate(std::size_t m) const;
};

struct BoostStage {
    LinearModel learner;
    double step = 0.0;
};

/// A boosted or bagged combination of affine base learners. Either kind
/// collapses to a single affine map with identical predictions.
struct EnsembleModel {
    enum class Kind { Boosted, Bagged };

    Kind kind = Kind::Boosted;
    FeatureMap feature_map;
    Eigen::VectorXd base_constant;  // boosting initializer
    std::vector<BoostStage> stages;
    std::vector<LinearModel> members;

    Eigen::Index outputs() const;
    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::MatrixXd predict_rows(const Eigen::MatrixXd& x) const;
    LinearModel collapse() const;
    /// First `count` stages (Boosted) or members (Bagged).
    EnsembleModel truncated(std::size_t count) const;
};

/// Per-stage diagnostics: train_mse[0] is the constant initializer,
/// train_mse[t] the value after stage t; steps[t-1] is theta_t.
struct BoostTrace {
    std::vector<double> train_mse;
    std::vector<double> steps;
};

/// Squared-loss gradient boosting: the negative gradient is the residual,
/// each stage is a least-squares fit to it (shared factorization), and the
/// step is either the constant theta or the exact line-search minimizer.
EnsembleModel fit_gradient_boosting(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const BoostConfig& cfg,
                                    BoostTrace* trace = nullptr);

/// Bootstrap aggregation of least-squares members; prediction is their mean.
EnsembleModel fit_bagging(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const BagConfig& cfg,
                          std::vector<std::string>* warnings = nullptr);

Eigen::VectorXd predict_ensemble(const EnsembleModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Bootstrap indices drawn by the default resampler.
std::vector<std::size_t> bootstrap_indices(std::uint64_t seed, std::size_t member, std::size_t m, std::size_t mp);

struct JensenCheck {
    double bagged_loss = 0.0;       // mean squared error of the averaged predictor
    double mean_member_loss = 0.0;  // average over members of their mean squared error
    // Squared size of the rounding error in the averaged prediction; losses
    // below it are not resolvable.
    double rounding_floor = 0.0;
    bool holds() const { return bagged_loss <= mean_member_loss * (1.0 + 1e-12) + rounding_floor; }
};
JensenCheck bagging_jensen(const EnsembleModel& bagged, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

double mean_squared_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

nlohmann::json ensemble_to_json(const EnsembleModel& m, bool include_learners = true);
EnsembleModel ensemble_from_json(const nlohmann::json& j);

}  // namespace elpf
