#pragma once

#include <Eigen/Dense>

#include "elpf/case_io.hpp"

namespace elpf {

/// Rectangular bus voltages V_i = e_i + j f_i.
struct VoltageState {
    Eigen::VectorXd e;
    Eigen::VectorXd f;

    std::size_t size() const { return static_cast<std::size_t>(e.size()); }
    Eigen::VectorXcd phasors() const;
    /// Feature row [e_1, f_1, e_2, f_2, ...].
    Eigen::VectorXd interleaved() const;
    static VoltageState from_phasors(const Eigen::VectorXcd& v);
    static VoltageState from_interleaved(const Eigen::Ref<const Eigen::VectorXd>& x);
};

/// Net bus injections and from-end branch flows, all p.u.
struct FlowRecord {
    Eigen::VectorXd p_inj;
    Eigen::VectorXd q_inj;
    Eigen::VectorXd p_flow;
    Eigen::VectorXd q_flow;
};

struct AcOptions {
    double tol = 1e-8;
    int max_iter = 30;
};

struct AcResult {
    VoltageState voltage;
    int iterations = 0;
    double max_mismatch = 0.0;
};

class AcDivergenceError : public ConvergenceError {
  public:
    AcDivergenceError(const std::string& what, int iteration, double mismatch)
        : ConvergenceError(what), iteration_(iteration), mismatch_(mismatch) {}
    int iteration() const { return iteration_; }
    double mismatch() const { return mismatch_; }

  private:
    int iteration_;
    double mismatch_;
};

/// Polar-form power flow equations of one case. Unknowns are packed as
/// [angles of PV and PQ buses, magnitudes of PQ buses].
class PowerFlowEquations {
  public:
    PowerFlowEquations(const NetworkCase& c, const Eigen::MatrixXcd& ybus);

    Eigen::Index n_unknowns() const { return static_cast<Eigen::Index>(pvpq_.size() + pq_.size()); }
    /// Flat start: angles 0, PQ magnitudes 1.
    Eigen::VectorXd initial_guess() const;
    Eigen::VectorXcd voltages(const Eigen::VectorXd& x) const;
    /// Calculated minus scheduled: [P at PV and PQ buses; Q at PQ buses].
    Eigen::VectorXd mismatch(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

  private:
    const Eigen::MatrixXcd& ybus_;
    std::vector<Eigen::Index> pvpq_;
    std::vector<Eigen::Index> pq_;
    Eigen::VectorXd vm0_;
    Eigen::VectorXcd s_sched_;
};

/// Newton-Raphson from a flat start. Throws AcDivergenceError when the
/// mismatch does not reach `tol` within `max_iter` updates or the Jacobian
/// is singular. Generator reactive limits are not enforced.
AcResult solve_ac(const NetworkCase& c, const AcOptions& opts = {});
AcResult solve_ac(const NetworkCase& c, const Eigen::MatrixXcd& ybus, const AcOptions& opts = {});

FlowRecord compute_flows(const NetworkCase& c, const VoltageState& v);
FlowRecord compute_flows(const NetworkCase& c, const Eigen::MatrixXcd& ybus, const VoltageState& v);

/// Scheduled complex injection per bus: generator setpoints minus loads.
/// The slack entry is meaningless and left at its setpoint-based value.
Eigen::VectorXcd scheduled_injections(const NetworkCase& c);

}  // namespace elpf
