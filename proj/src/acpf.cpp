#include "elpf/acpf.hpp"

#include <cmath>
#include <sstream>

namespace elpf {

Eigen::VectorXcd VoltageState::phasors() const {
    Eigen::VectorXcd v(e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) v[i] = {e[i], f[i]};
    return v;
}

Eigen::VectorXd VoltageState::interleaved() const {
    Eigen::VectorXd x(2 * e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        x[2 * i] = e[i];
        x[2 * i + 1] = f[i];
    }
    return x;
}

VoltageState VoltageState::from_phasors(const Eigen::VectorXcd& v) {
    return {v.real(), v.imag()};
}

VoltageState VoltageState::from_interleaved(const Eigen::Ref<const Eigen::VectorXd>& x) {
    const Eigen::Index n = x.size() / 2;
    VoltageState s{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        s.e[i] = x[2 * i];
        s.f[i] = x[2 * i + 1];
    }
    return s;
}

Eigen::VectorXcd scheduled_injections(const NetworkCase& c) {
    Eigen::VectorXcd s(static_cast<Eigen::Index>(c.n_bus()));
    for (std::size_t i = 0; i < c.n_bus(); ++i) s[static_cast<Eigen::Index>(i)] = {-c.buses[i].p_load, -c.buses[i].q_load};
    for (const auto& g : c.generators) s[g.bus] += g.p_setpoint;
    return s;
}

PowerFlowEquations::PowerFlowEquations(const NetworkCase& c, const Eigen::MatrixXcd& ybus)
    : ybus_(ybus), vm0_(static_cast<Eigen::Index>(c.n_bus())), s_sched_(scheduled_injections(c)) {
    std::vector<Eigen::Index> pv;
    for (std::size_t i = 0; i < c.n_bus(); ++i) {
        const auto& b = c.buses[i];
        const auto idx = static_cast<Eigen::Index>(i);
        vm0_[idx] = b.kind == BusKind::PQ ? 1.0 : b.v_setpoint;
        if (b.kind == BusKind::PV) pv.push_back(idx);
        if (b.kind == BusKind::PQ) pq_.push_back(idx);
    }
    pvpq_ = pv;
    pvpq_.insert(pvpq_.end(), pq_.begin(), pq_.end());
}

Eigen::VectorXd PowerFlowEquations::initial_guess() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_unknowns());
    for (std::size_t k = 0; k < pq_.size(); ++k) x[static_cast<Eigen::Index>(pvpq_.size() + k)] = 1.0;
    return x;
}

Eigen::VectorXcd PowerFlowEquations::voltages(const Eigen::VectorXd& x) const {
    Eigen::VectorXd va = Eigen::VectorXd::Zero(vm0_.size());
    Eigen::VectorXd vm = vm0_;
    for (std::size_t k = 0; k < pvpq_.size(); ++k) va[pvpq_[k]] = x[static_cast<Eigen::Index>(k)];
    for (std::size_t k = 0; k < pq_.size(); ++k) vm[pq_[k]] = x[static_cast<Eigen::Index>(pvpq_.size() + k)];
    Eigen::VectorXcd v(vm.size());
    for (Eigen::Index i = 0; i < vm.size(); ++i) v[i] = std::polar(vm[i], va[i]);
    return v;
}

Eigen::VectorXd PowerFlowEquations::mismatch(const Eigen::VectorXd& x) const {
    const Eigen::VectorXcd v = voltages(x);
    const Eigen::VectorXcd s = v.cwiseProduct((ybus_ * v).conjugate()) - s_sched_;
    Eigen::VectorXd f(n_unknowns());
    for (std::size_t k = 0; k < pvpq_.size(); ++k) f[static_cast<Eigen::Index>(k)] = s[pvpq_[k]].real();
    for (std::size_t k = 0; k < pq_.size(); ++k) f[static_cast<Eigen::Index>(pvpq_.size() + k)] = s[pq_[k]].imag();
    return f;
}

Eigen::MatrixXd PowerFlowEquations::jacobian(const Eigen::VectorXd& x) const {
    using cd = std::complex<double>;
    const Eigen::VectorXcd v = voltages(x);
    const Eigen::VectorXcd current = ybus_ * v;
    const Eigen::VectorXcd vnorm = v.array() / v.array().abs();
    const Eigen::Index n = v.size();

    // dS/dVm = diag(V) conj(Y diag(Vnorm)) + diag(conj(I)) diag(Vnorm)
    // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
    Eigen::MatrixXcd ds_dvm(n, n), ds_dva(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const cd yij = ybus_(i, j);
            ds_dvm(i, j) = v[i] * std::conj(yij * vnorm[j]);
            ds_dva(i, j) = cd(0.0, 1.0) * v[i] * std::conj(-yij * v[j]);
        }
        ds_dvm(j, j) += std::conj(current[j]) * vnorm[j];
        ds_dva(j, j) += cd(0.0, 1.0) * v[j] * std::conj(current[j]);
    }

    const auto npvpq = static_cast<Eigen::Index>(pvpq_.size());
    const auto npq = static_cast<Eigen::Index>(pq_.size());
    Eigen::MatrixXd jac(npvpq + npq, npvpq + npq);
    for (Eigen::Index r = 0; r < npvpq; ++r) {
        const Eigen::Index i = pvpq_[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < npvpq; ++c) jac(r, c) = ds_dva(i, pvpq_[static_cast<std::size_t>(c)]).real();
        for (Eigen::Index c = 0; c < npq; ++c) jac(r, npvpq + c) = ds_dvm(i, pq_[static_cast<std::size_t>(c)]).real();
    }
    for (Eigen::Index r = 0; r < npq; ++r) {
        const Eigen::Index i = pq_[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < npvpq; ++c) jac(npvpq + r, c) = ds_dva(i, pvpq_[static_cast<std::size_t>(c)]).imag();
        for (Eigen::Index c = 0; c < npq; ++c) jac(npvpq + r, npvpq + c) = ds_dvm(i, pq_[static_cast<std::size_t>(c)]).imag();
    }
    return jac;
}

AcResult solve_ac(const NetworkCase& c, const AcOptions& opts) {
    const Eigen::MatrixXcd ybus = build_admittance(c);
    return solve_ac(c, ybus, opts);
}

AcResult solve_ac(const NetworkCase& c, const Eigen::MatrixXcd& ybus, const AcOptions& opts) {
    if (!(opts.tol > 0.0)) throw InputError("solve_ac: tol must be positive");
    PowerFlowEquations eqs(c, ybus);
    Eigen::VectorXd x = eqs.initial_guess();
    Eigen::VectorXd f = eqs.mismatch(x);
    double norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    int it = 0;
    while (norm > opts.tol) {
        if (it >= opts.max_iter || !std::isfinite(norm)) {
            std::ostringstream msg;
            msg << "AC power flow did not converge after " << it << " iterations (max mismatch " << norm << ")";
            throw AcDivergenceError(msg.str(), it, norm);
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(eqs.jacobian(x));
        const double det_scale = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
        if (!(det_scale > 1e-14)) {
            throw AcDivergenceError("singular Jacobian at iteration " + std::to_string(it), it, norm);
        }
        x -= lu.solve(f);
        ++it;
        f = eqs.mismatch(x);
        norm = f.lpNorm<Eigen::Infinity>();
    }
    Eigen::VectorXcd v = eqs.voltages(x);
    const auto slack = static_cast<Eigen::Index>(c.slack_index());
    v[slack] = {c.buses[static_cast<std::size_t>(slack)].v_setpoint, 0.0};
    return {VoltageState::from_phasors(v), it, norm};
}

FlowRecord compute_flows(const NetworkCase& c, const VoltageState& v) {
    return compute_flows(c, build_admittance(c), v);
}

FlowRecord compute_flows(const NetworkCase& c, const Eigen::MatrixXcd& ybus, const VoltageState& v) {
    if (v.size() != c.n_bus()) throw InputError("compute_flows: voltage length does not match bus count");
    const Eigen::VectorXcd vv = v.phasors();
    const Eigen::VectorXcd s = vv.cwiseProduct((ybus * vv).conjugate());
    FlowRecord out;
    out.p_inj = s.real();
    out.q_inj = s.imag();
    const auto nl = static_cast<Eigen::Index>(c.n_branch());
    out.p_flow.resize(nl);
    out.q_flow.resize(nl);
    for (Eigen::Index l = 0; l < nl; ++l) {
        const auto& br = c.branches[static_cast<std::size_t>(l)];
        const auto y = branch_admittance(br);
        const std::complex<double> vf = vv[br.from], vt = vv[br.to];
        const std::complex<double> sf = vf * std::conj(y.yff * vf + y.yft * vt);
        out.p_flow[l] = sf.real();
        out.q_flow[l] = sf.imag();
    }
    return out;
}

}  // namespace elpf
