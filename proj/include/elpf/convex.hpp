#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace elpf {

/// sum_{v in vars} x_v^2 <= radius^2
struct BallConstraint {
    std::vector<Eigen::Index> vars;
    double radius = 0.0;
};

/// minimize   1/2 x' diag(q) x + c' x + c0
/// subject to A x = b,  G x <= h,  and every ball constraint.
struct ConvexProblem {
    Eigen::Index n = 0;
    Eigen::VectorXd q_diag;
    Eigen::VectorXd c;
    double c0 = 0.0;
    Eigen::SparseMatrix<double> a_eq;
    Eigen::VectorXd b_eq;
    Eigen::SparseMatrix<double> g_lin;
    Eigen::VectorXd h_lin;
    std::vector<BallConstraint> balls;

    explicit ConvexProblem(Eigen::Index n_vars = 0);
    double objective(const Eigen::VectorXd& x) const;
    /// Largest violation of any constraint at x (0 when feasible).
    double max_violation(const Eigen::VectorXd& x) const;
    Eigen::Index n_ineq() const { return g_lin.rows() + static_cast<Eigen::Index>(balls.size()); }
};

/// Incremental builder for sparse constraint rows.
class RowBuilder {
  public:
    explicit RowBuilder(Eigen::Index n_cols) : n_cols_(n_cols) {}
    /// Adds sum_k coef_k x_{idx_k} (<= or =) rhs; returns the row index.
    Eigen::Index add(const std::vector<std::pair<Eigen::Index, double>>& terms, double rhs);
    Eigen::Index rows() const { return static_cast<Eigen::Index>(rhs_.size()); }
    Eigen::SparseMatrix<double> matrix() const;
    Eigen::VectorXd rhs() const;

  private:
    Eigen::Index n_cols_;
    std::vector<Eigen::Triplet<double>> triplets_;
    std::vector<double> rhs_;
};

enum class SolveStatus { Optimal, Infeasible, MaxIter };
std::string to_string(SolveStatus s);

struct ConvexOptions {
    double tol = 1e-8;
    int max_iter = 200;
};

struct ConvexSolution {
    SolveStatus status = SolveStatus::MaxIter;
    Eigen::VectorXd x;
    Eigen::VectorXd y_eq;   // equality multipliers
    Eigen::VectorXd z_lin;  // linear inequality multipliers
    Eigen::VectorXd z_ball;
    /// Per ball, its term in the stationarity condition on the ball's
    /// variables; equals z_ball * x_S / r^2 at exact complementarity.
    std::vector<Eigen::VectorXd> ball_gradient;
    double objective = 0.0;
    int iterations = 0;
    // Residuals of the internally scaled KKT system.
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double complementarity = 0.0;
    double kkt_residual = 0.0;
    /// Phase-I optimum when positive: the minimum uniform violation (certificate).
    double infeasibility = 0.0;
};

/// Primal-dual interior-point method on the conic form (linear rows plus one
/// second-order cone per ball) with Nesterov-Todd scaling and Mehrotra
/// correction. When it fails, a phase-I problem (minimize the uniform
/// constraint violation) decides between Infeasible and MaxIter.
ConvexSolution solve_convex(const ConvexProblem& p, const ConvexOptions& opts = {});

}  // namespace elpf
