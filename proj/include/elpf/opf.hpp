#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "elpf/case_io.hpp"
#include "elpf/convex.hpp"
#include "elpf/linmodel.hpp"

namespace elpf {

/// Collapsed affine surrogates feeding the relaxed OPF.
struct SurrogateModels {
    LinearModel bus_p;  // 2n -> n
    LinearModel bus_q;
    std::vector<LinearModel> branch;  // one (P_ij, Q_ij) model per branch
};

struct DdcrOptions {
    /// Adds f_slack = 0 to remove the rotational freedom of X.
    bool anchor_slack_angle = true;
};

/// Column offsets of each variable family in the convex program.
struct DdcrLayout {
    Eigen::Index voltage = 0;  // 2n entries, [e_1, f_1, ...]
    Eigen::Index p_gen = 0;
    Eigen::Index q_gen = 0;
    Eigen::Index p_branch = 0;  // one per rated branch
    Eigen::Index q_branch = 0;
    std::vector<std::size_t> rated_branches;
};

struct DdcrProblem {
    ConvexProblem program;
    DdcrLayout layout;
    std::size_t bus_linear_rows = 0;
    std::size_t voltage_balls = 0;
    std::size_t branch_balls = 0;
    std::size_t branch_linear_rows = 0;
    std::size_t generator_rows = 0;
};

struct OpfSolution {
    std::string method;
    SolveStatus status = SolveStatus::MaxIter;
    double objective = 0.0;  // $/hr
    Eigen::VectorXd p_gen;   // p.u.
    Eigen::VectorXd q_gen;
    Eigen::VectorXd voltages;  // rectangular [e_1, f_1, ...] (DDCR) or angles (DC)
    Eigen::VectorXd p_flow;
    Eigen::VectorXd q_flow;
    double kkt_residual = 0.0;
    double max_violation = 0.0;
    double infeasibility = 0.0;
    // Largest gap between net generation and fitted injection over the bus
    // rows (p.u.); zero would mean every fitted balance holds with equality.
    double max_balance_slack = 0.0;
    int iterations = 0;
    double runtime_s = 0.0;
    std::optional<double> gap_vs_reference;
};

/// The relaxed OPF: per-bus fitted injections bounded by net generation,
/// voltage-magnitude balls, generator boxes, and, for rated branches,
/// fitted flows bounded by flow variables inside the apparent-power ball.
DdcrProblem build_ddcr(const NetworkCase& c, const SurrogateModels& models, const DdcrOptions& opts = {});
OpfSolution solve_ddcr(const NetworkCase& c, const DdcrProblem& problem, const ConvexOptions& opts = {});

/// Lossless B-theta DC OPF (taps and phase shifts as in MATPOWER's DC model).
ConvexProblem build_dcopf(const NetworkCase& c);
OpfSolution solve_dcopf(const NetworkCase& c, const ConvexOptions& opts = {});

/// Generator cost polynomial sum with outputs in p.u. (converted to MW).
double dispatch_cost(const NetworkCase& c, const Eigen::VectorXd& p_gen);

/// Reference objective values ($/hr) shipped for the bundled cases.
struct ReferenceObjectives {
    double acopf = 0.0;
    double ddcr_published = 0.0;
    double dcopf_published = 0.0;
    double sdpopf_published = 0.0;
};
std::optional<ReferenceObjectives> bundled_reference(const std::string& case_name);

/// (value - reference) / reference
double relative_gap(double value, double reference);

struct GapRow {
    std::string case_name;
    std::string method;
    SolveStatus status = SolveStatus::MaxIter;
    double objective = 0.0;
    std::optional<double> reference;
    std::optional<double> gap;
    std::optional<double> published_objective;
    std::string note;
};
std::vector<GapRow> gap_report(const std::string& case_name, const std::vector<OpfSolution>& solutions);
std::string gap_report_csv(const std::vector<GapRow>& rows);

nlohmann::json solution_to_json(const OpfSolution& s);

}  // namespace elpf
