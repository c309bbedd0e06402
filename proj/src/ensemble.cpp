#include "elpf/ensemble.hpp"

#include <cmath>
#include <limits>

namespace elpf {

namespace {

// Safety factor on eps x condition: a stage whose fitted values are below that
// fraction of the residual has no descent direction left; any step minimizes
// the loss and 1 is reported.
constexpr double kDegenerateStage = 10.0;
constexpr double kFallbackRidge = 1e-8;

}  // namespace

void BoostConfig::validate() const {
    if (step_mode == StepMode::Constant && !(theta > 0.0 && theta < 2.0))
        throw InputError("boosting: constant theta must lie in (0, 2)");
    if (!(ridge_lambda >= 0.0)) throw InputError("boosting: ridge_lambda must be >= 0");
}

void BagConfig::validate(std::size_t m) const {
    if (n_bootstraps < 1) throw InputError("bagging: need at least one bootstrap");
    const std::size_t mp = sample_size ? sample_size : m;
    if (mp < 1 || mp > m) throw InputError("bagging: sample size must satisfy 1 <= M' <= M");
    if (!(ridge_lambda >= 0.0)) throw InputError("bagging: ridge_lambda must be >= 0");
}

double mean_squared_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) throw InputError("mse: shape mismatch");
    if (pred.size() == 0) return 0.0;
    return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

Eigen::Index EnsembleModel::outputs() const {
    if (kind == Kind::Boosted) return base_constant.size();
    return members.empty() ? 0 : members.front().outputs();
}

Eigen::VectorXd EnsembleModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (kind == Kind::Boosted) {
        Eigen::VectorXd out = base_constant;
        for (const auto& s : stages) out += s.step * s.learner.predict(x);
        return out;
    }
    if (members.empty()) throw InputError("predict: bagged model has no members");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(outputs());
    for (const auto& m : members) out += m.predict(x);
    return out / static_cast<double>(members.size());
}

Eigen::MatrixXd EnsembleModel::predict_rows(const Eigen::MatrixXd& x) const {
    if (kind == Kind::Boosted) {
        Eigen::MatrixXd out = base_constant.transpose().replicate(x.rows(), 1);
        for (const auto& s : stages) out += s.step * s.learner.predict_rows(x);
        return out;
    }
    if (members.empty()) throw InputError("predict: bagged model has no members");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), outputs());
    for (const auto& m : members) out += m.predict_rows(x);
    return out / static_cast<double>(members.size());
}

LinearModel EnsembleModel::collapse() const {
    LinearModel out;
    out.feature_map = feature_map;
    if (kind == Kind::Boosted) {
        out.intercept = base_constant;
        out.coeffs = Eigen::MatrixXd::Zero(base_constant.size(), stages.empty() ? 0 : stages.front().learner.coeffs.cols());
        for (const auto& s : stages) {
            if (s.learner.degree != 1) throw InputError("collapse: only degree-1 learners are affine");
            if (out.coeffs.cols() == 0) out.coeffs = Eigen::MatrixXd::Zero(s.learner.outputs(), s.learner.coeffs.cols());
            out.coeffs += s.step * s.learner.coeffs;
            out.intercept += s.step * s.learner.intercept;
        }
        return out;
    }
    if (members.empty()) throw InputError("collapse: bagged model has no members");
    out.coeffs = Eigen::MatrixXd::Zero(members.front().outputs(), members.front().coeffs.cols());
    out.intercept = Eigen::VectorXd::Zero(members.front().outputs());
    for (const auto& m : members) {
        if (m.degree != 1) throw InputError("collapse: only degree-1 learners are affine");
        out.coeffs += m.coeffs;
        out.intercept += m.intercept;
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    out.coeffs *= inv;
    out.intercept *= inv;
    return out;
}

EnsembleModel EnsembleModel::truncated(std::size_t count) const {
    EnsembleModel out = *this;
    if (kind == Kind::Boosted) {
        if (count > stages.size()) throw InputError("truncated: more stages requested than fitted");
        out.stages.resize(count);
    } else {
        if (count < 1 || count > members.size()) throw InputError("truncated: member count out of range");
        out.members.resize(count);
    }
    return out;
}

EnsembleModel fit_gradient_boosting(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const BoostConfig& cfg,
                                    BoostTrace* trace) {
    cfg.validate();
    if (x.rows() != y.rows()) throw InputError("boosting: X and Y row counts differ");
    if (x.rows() < 1) throw InputError("boosting: empty training set");
    if (!y.allFinite()) throw InputError("boosting: non-finite labels");

    EnsembleModel model;
    model.kind = EnsembleModel::Kind::Boosted;
    model.base_constant = y.colwise().mean().transpose();
    Eigen::MatrixXd residual = y.rowwise() - model.base_constant.transpose();
    if (trace) {
        trace->train_mse = {residual.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(residual.size(), 1))};
        trace->steps.clear();
    }
    if (cfg.n_learners == 0) return model;

    const LeastSquaresSolver solver(x, cfg.ridge_lambda);
    model.stages.reserve(cfg.n_learners);
    for (std::size_t t = 0; t < cfg.n_learners; ++t) {
        LinearModel learner = solver.fit(residual);
        const Eigen::MatrixXd fitted = learner.predict_rows(x);
        double step = cfg.theta;
        if (cfg.step_mode == BoostConfig::StepMode::LineSearch) {
            const double denom = fitted.squaredNorm();
            const double rnorm = residual.squaredNorm();
            // A stage whose fit is within the rounding noise of the projection
            // (about eps x condition of the design) carries no direction.
            const double noise = kDegenerateStage * std::numeric_limits<double>::epsilon() * solver.condition();
            step = denom <= noise * noise * rnorm || denom == 0.0
                       ? 1.0
                       : (residual.array() * fitted.array()).sum() / denom;
        }
        residual -= step * fitted;
        if (trace) {
            trace->train_mse.push_back(residual.squaredNorm() / static_cast<double>(residual.size()));
            trace->steps.push_back(step);
        }
        model.stages.push_back({std::move(learner), step});
    }
    return model;
}

std::vector<std::size_t> bootstrap_indices(std::uint64_t seed, std::size_t member, std::size_t m, std::size_t mp) {
    Rng rng(seed, 0xBA66ED, member);
    std::vector<std::size_t> idx(mp);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(m));
    return idx;
}

EnsembleModel fit_bagging(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const BagConfig& cfg,
                          std::vector<std::string>* warnings) {
    const auto m = static_cast<std::size_t>(x.rows());
    if (m < 1) throw InputError("bagging: empty training set");
    if (x.rows() != y.rows()) throw InputError("bagging: X and Y row counts differ");
    cfg.validate(m);
    const std::size_t mp = cfg.sample_size ? cfg.sample_size : m;

    EnsembleModel model;
    model.kind = EnsembleModel::Kind::Bagged;
    model.members.resize(cfg.n_bootstraps);
    std::vector<char> fell_back(cfg.n_bootstraps, 0);
    parallel_for(cfg.n_bootstraps, cfg.jobs, [&](std::size_t b) {
        const auto idx = cfg.resampler ? cfg.resampler(b, m, mp) : bootstrap_indices(cfg.seed, b, m, mp);
        if (idx.size() != mp) throw InputError("bagging: resampler returned the wrong sample count");
        Eigen::MatrixXd xb(static_cast<Eigen::Index>(mp), x.cols());
        Eigen::MatrixXd yb(static_cast<Eigen::Index>(mp), y.cols());
        for (std::size_t r = 0; r < mp; ++r) {
            if (idx[r] >= m) throw InputError("bagging: resampler index out of range");
            xb.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
            yb.row(static_cast<Eigen::Index>(r)) = y.row(static_cast<Eigen::Index>(idx[r]));
        }
        if (mp < 2) {
            // A single-row resample: the least-squares fit is the constant row.
            LinearModel c;
            c.coeffs = Eigen::MatrixXd::Zero(y.cols(), x.cols());
            c.intercept = yb.row(0).transpose();
            model.members[b] = std::move(c);
            return;
        }
        LeastSquaresSolver solver(xb, cfg.ridge_lambda);
        if (solver.rank() == 0 && cfg.ridge_lambda == 0.0) {
            fell_back[b] = 1;
            solver = LeastSquaresSolver(xb, kFallbackRidge);
        }
        model.members[b] = solver.fit(yb);
    });
    if (warnings) {
        std::size_t n = 0;
        for (char f : fell_back) n += f;
        if (n)
            warnings->push_back("bagging: " + std::to_string(n) +
                                " degenerate bootstrap(s) had a rank-0 design; fitted with ridge 1e-8");
    }
    return model;
}

Eigen::VectorXd predict_ensemble(const EnsembleModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) { return m.predict(x); }

JensenCheck bagging_jensen(const EnsembleModel& bagged, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    if (bagged.kind != EnsembleModel::Kind::Bagged) throw InputError("bagging_jensen: model is not bagged");
    JensenCheck out;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(y.rows(), y.cols());
    for (const auto& mem : bagged.members) {
        const Eigen::MatrixXd p = mem.predict_rows(x);
        out.mean_member_loss += mean_squared_error(p, y);
        sum += p;
    }
    const double inv = 1.0 / static_cast<double>(bagged.members.size());
    out.mean_member_loss *= inv;
    out.bagged_loss = mean_squared_error(sum * inv, y);
    const double ulp = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, y.cwiseAbs().maxCoeff());
    out.rounding_floor = ulp * ulp;
    return out;
}

nlohmann::json ensemble_to_json(const EnsembleModel& m, bool include_learners) {
    nlohmann::json j;
    j["kind"] = m.kind == EnsembleModel::Kind::Boosted ? "boosted" : "bagged";
    j["collapsed"] = model_to_json(m.collapse());
    if (m.kind == EnsembleModel::Kind::Boosted) {
        j["base_constant"] = std::vector<double>(m.base_constant.data(), m.base_constant.data() + m.base_constant.size());
        std::vector<double> steps;
        for (const auto& s : m.stages) steps.push_back(s.step);
        j["steps"] = steps;
        if (include_learners) {
            nlohmann::json st = nlohmann::json::array();
            for (const auto& s : m.stages) st.push_back(model_to_json(s.learner));
            j["stages"] = st;
        }
    } else {
        j["n_members"] = m.members.size();
        if (include_learners) {
            nlohmann::json mem = nlohmann::json::array();
            for (const auto& s : m.members) mem.push_back(model_to_json(s));
            j["members"] = mem;
        }
    }
    return j;
}

EnsembleModel ensemble_from_json(const nlohmann::json& j) {
    EnsembleModel m;
    try {
        const auto kind = j.at("kind").get<std::string>();
        const LinearModel collapsed = model_from_json(j.at("collapsed"));
        m.feature_map = collapsed.feature_map;
        if (kind == "boosted") {
            m.kind = EnsembleModel::Kind::Boosted;
            const auto base = j.at("base_constant").get<std::vector<double>>();
            m.base_constant = Eigen::Map<const Eigen::VectorXd>(base.data(), static_cast<Eigen::Index>(base.size()));
            const auto steps = j.at("steps").get<std::vector<double>>();
            if (j.contains("stages")) {
                const auto& st = j.at("stages");
                if (st.size() != steps.size()) throw InputError("ensemble JSON: stage/step count mismatch");
                for (std::size_t t = 0; t < steps.size(); ++t) m.stages.push_back({model_from_json(st.at(t)), steps[t]});
            } else {
                // Learners were not stored: one unit-step stage carries the collapsed map.
                LinearModel delta = collapsed;
                delta.intercept -= m.base_constant;
                m.stages.push_back({delta, 1.0});
            }
        } else if (kind == "bagged") {
            m.kind = EnsembleModel::Kind::Bagged;
            if (j.contains("members")) {
                for (const auto& mem : j.at("members")) m.members.push_back(model_from_json(mem));
            } else {
                m.members.push_back(collapsed);
            }
        } else {
            throw InputError("ensemble JSON: unknown kind '" + kind + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("ensemble JSON: ") + e.what());
    }
    return m;
}

}  // namespace elpf
