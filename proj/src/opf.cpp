#include "elpf/opf.hpp"

#include <chrono>
#include <cmath>
#include <map>

namespace elpf {

namespace {

using Terms = std::vector<std::pair<Eigen::Index, double>>;

void add_cost(ConvexProblem& p, const NetworkCase& c, Eigen::Index offset) {
    const double base = c.base_mva;
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
        const auto& cost = c.generators[g].cost;
        const auto col = offset + static_cast<Eigen::Index>(g);
        p.q_diag[col] = 2.0 * cost.c2 * base * base;
        p.c[col] = cost.c1 * base;
        p.c0 += cost.c0;
    }
}

// lo <= x <= hi as two rows, or one equality when the box is a point.
// Returns the number of inequality rows added.
std::size_t add_box(RowBuilder& rows, RowBuilder& eq, Eigen::Index col, double lo, double hi) {
    if (lo == hi) {
        eq.add({{col, 1.0}}, lo);
        return 0;
    }
    rows.add({{col, 1.0}}, hi);
    rows.add({{col, -1.0}}, -lo);
    return 2;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

double dispatch_cost(const NetworkCase& c, const Eigen::VectorXd& p_gen) {
    double total = 0.0;
    for (std::size_t g = 0; g < c.generators.size(); ++g)
        total += c.generators[g].cost.at_mw(p_gen[static_cast<Eigen::Index>(g)] * c.base_mva);
    return total;
}

DdcrProblem build_ddcr(const NetworkCase& c, const SurrogateModels& models, const DdcrOptions& opts) {
    const auto n = static_cast<Eigen::Index>(c.n_bus());
    const auto ng = static_cast<Eigen::Index>(c.generators.size());
    for (const auto* m : {&models.bus_p, &models.bus_q}) {
        if (m->degree != 1 || m->outputs() != n || m->inputs() != 2 * n ||
            m->feature_map.kind != FeatureMap::Kind::AllBuses)
            throw InputError("build_ddcr: bus models must be affine maps from 2n voltages to n injections");
    }
    if (models.branch.size() != c.n_branch()) throw InputError("build_ddcr: one branch model per branch required");

    DdcrProblem out;
    DdcrLayout& lay = out.layout;
    for (std::size_t l = 0; l < c.n_branch(); ++l)
        if (c.branches[l].rated()) lay.rated_branches.push_back(l);
    const auto nr = static_cast<Eigen::Index>(lay.rated_branches.size());
    lay.voltage = 0;
    lay.p_gen = 2 * n;
    lay.q_gen = lay.p_gen + ng;
    lay.p_branch = lay.q_gen + ng;
    lay.q_branch = lay.p_branch + nr;
    const Eigen::Index nvar = lay.q_branch + nr;

    ConvexProblem p(nvar);
    add_cost(p, c, lay.p_gen);

    RowBuilder ineq(nvar);
    RowBuilder eq(nvar);
    const auto gens_at = c.generators_by_bus();
    // A_i X + b_i <= sum P_G(i) - P_L(i), same for Q.
    for (int fam = 0; fam < 2; ++fam) {
        const LinearModel& m = fam == 0 ? models.bus_p : models.bus_q;
        const Eigen::Index gen_off = fam == 0 ? lay.p_gen : lay.q_gen;
        for (Eigen::Index i = 0; i < n; ++i) {
            Terms t;
            for (Eigen::Index j = 0; j < 2 * n; ++j) t.emplace_back(lay.voltage + j, m.coeffs(i, j));
            for (auto g : gens_at[static_cast<std::size_t>(i)]) t.emplace_back(gen_off + static_cast<Eigen::Index>(g), -1.0);
            const auto& bus = c.buses[static_cast<std::size_t>(i)];
            const double load = fam == 0 ? bus.p_load : bus.q_load;
            ineq.add(t, -load - m.intercept[i]);
            ++out.bus_linear_rows;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        p.balls.push_back({{lay.voltage + 2 * i, lay.voltage + 2 * i + 1}, c.buses[static_cast<std::size_t>(i)].v_max});
        ++out.voltage_balls;
    }
    for (Eigen::Index g = 0; g < ng; ++g) {
        const auto& gen = c.generators[static_cast<std::size_t>(g)];
        out.generator_rows += add_box(ineq, eq, lay.p_gen + g, gen.p_min, gen.p_max);
        out.generator_rows += add_box(ineq, eq, lay.q_gen + g, gen.q_min, gen.q_max);
    }
    for (Eigen::Index r = 0; r < nr; ++r) {
        const std::size_t l = lay.rated_branches[static_cast<std::size_t>(r)];
        const LinearModel& m = models.branch[l];
        if (m.degree != 1 || m.outputs() != 2) throw InputError("build_ddcr: branch models must be affine with 2 outputs");
        const auto cols = m.feature_map.columns(n);
        if (static_cast<Eigen::Index>(cols.size()) != m.inputs()) throw InputError("build_ddcr: branch model feature mismatch");
        for (int k = 0; k < 2; ++k) {
            Terms t;
            for (std::size_t j = 0; j < cols.size(); ++j) t.emplace_back(lay.voltage + cols[j], m.coeffs(k, static_cast<Eigen::Index>(j)));
            t.emplace_back((k == 0 ? lay.p_branch : lay.q_branch) + r, -1.0);
            ineq.add(t, -m.intercept[k]);
            ++out.branch_linear_rows;
        }
        p.balls.push_back({{lay.p_branch + r, lay.q_branch + r}, c.branches[l].s_max});
        ++out.branch_balls;
    }
    p.g_lin = ineq.matrix();
    p.h_lin = ineq.rhs();

    if (opts.anchor_slack_angle) eq.add({{lay.voltage + 2 * static_cast<Eigen::Index>(c.slack_index()) + 1, 1.0}}, 0.0);
    p.a_eq = eq.matrix();
    p.b_eq = eq.rhs();

    out.program = std::move(p);
    return out;
}

OpfSolution solve_ddcr(const NetworkCase& c, const DdcrProblem& problem, const ConvexOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const ConvexSolution s = solve_convex(problem.program, opts);
    const auto& lay = problem.layout;
    const auto n = static_cast<Eigen::Index>(c.n_bus());
    const auto ng = static_cast<Eigen::Index>(c.generators.size());
    const auto nr = static_cast<Eigen::Index>(lay.rated_branches.size());

    OpfSolution out;
    out.method = "DDCR";
    out.status = s.status;
    out.objective = s.objective;
    out.voltages = s.x.segment(lay.voltage, 2 * n);
    out.p_gen = s.x.segment(lay.p_gen, ng);
    out.q_gen = s.x.segment(lay.q_gen, ng);
    out.p_flow = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.n_branch()));
    out.q_flow = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.n_branch()));
    for (Eigen::Index r = 0; r < nr; ++r) {
        const auto l = static_cast<Eigen::Index>(lay.rated_branches[static_cast<std::size_t>(r)]);
        out.p_flow[l] = s.x[lay.p_branch + r];
        out.q_flow[l] = s.x[lay.q_branch + r];
    }
    out.kkt_residual = s.kkt_residual;
    out.max_violation = problem.program.max_violation(s.x);
    out.infeasibility = s.infeasibility;
    if (problem.bus_linear_rows) {
        const auto rows = static_cast<Eigen::Index>(problem.bus_linear_rows);
        const Eigen::VectorXd slack = problem.program.h_lin.head(rows) - (problem.program.g_lin * s.x).head(rows);
        out.max_balance_slack = slack.maxCoeff();
    }
    out.iterations = s.iterations;
    out.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

ConvexProblem build_dcopf(const NetworkCase& c) {
    const auto n = static_cast<Eigen::Index>(c.n_bus());
    const auto ng = static_cast<Eigen::Index>(c.generators.size());
    const Eigen::Index theta = 0, pg = n;
    ConvexProblem p(n + ng);
    add_cost(p, c, pg);

    // Bbus theta + Pbusinj + Pd + Gs = Cg Pg
    Eigen::MatrixXd bbus = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd pbusinj = Eigen::VectorXd::Zero(n);
    RowBuilder ineq(n + ng);
    for (const auto& br : c.branches) {
        const double b = 1.0 / (br.impedance.imag() * br.tap_ratio);
        bbus(br.from, br.from) += b;
        bbus(br.to, br.to) += b;
        bbus(br.from, br.to) -= b;
        bbus(br.to, br.from) -= b;
        const double pfinj = -b * br.phase_shift;
        pbusinj[br.from] += pfinj;
        pbusinj[br.to] -= pfinj;
        if (br.rated()) {
            ineq.add({{theta + br.from, b}, {theta + br.to, -b}}, br.s_max - pfinj);
            ineq.add({{theta + br.from, -b}, {theta + br.to, b}}, br.s_max + pfinj);
        }
    }
    RowBuilder eq(n + ng);
    const auto gens_at = c.generators_by_bus();
    for (Eigen::Index i = 0; i < n; ++i) {
        Terms t;
        for (Eigen::Index j = 0; j < n; ++j)
            if (bbus(i, j) != 0.0) t.emplace_back(theta + j, bbus(i, j));
        for (auto g : gens_at[static_cast<std::size_t>(i)]) t.emplace_back(pg + static_cast<Eigen::Index>(g), -1.0);
        const auto& bus = c.buses[static_cast<std::size_t>(i)];
        eq.add(t, -bus.p_load - bus.g_shunt - pbusinj[i]);
    }
    eq.add({{theta + static_cast<Eigen::Index>(c.slack_index()), 1.0}}, 0.0);
    for (Eigen::Index g = 0; g < ng; ++g) {
        const auto& gen = c.generators[static_cast<std::size_t>(g)];
        add_box(ineq, eq, pg + g, gen.p_min, gen.p_max);
    }
    p.g_lin = ineq.matrix();
    p.h_lin = ineq.rhs();
    p.a_eq = eq.matrix();
    p.b_eq = eq.rhs();
    return p;
}

OpfSolution solve_dcopf(const NetworkCase& c, const ConvexOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const ConvexProblem p = build_dcopf(c);
    const ConvexSolution s = solve_convex(p, opts);
    const auto n = static_cast<Eigen::Index>(c.n_bus());
    const auto ng = static_cast<Eigen::Index>(c.generators.size());

    OpfSolution out;
    out.method = "DCOPF";
    out.status = s.status;
    out.objective = s.objective;
    out.voltages = s.x.head(n);
    out.p_gen = s.x.segment(n, ng);
    out.q_gen = Eigen::VectorXd::Zero(ng);
    out.p_flow.resize(static_cast<Eigen::Index>(c.n_branch()));
    out.q_flow = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.n_branch()));
    for (std::size_t l = 0; l < c.n_branch(); ++l) {
        const auto& br = c.branches[l];
        const double b = 1.0 / (br.impedance.imag() * br.tap_ratio);
        out.p_flow[static_cast<Eigen::Index>(l)] = b * (out.voltages[br.from] - out.voltages[br.to] - br.phase_shift);
    }
    out.kkt_residual = s.kkt_residual;
    out.max_violation = p.max_violation(s.x);
    out.infeasibility = s.infeasibility;
    out.iterations = s.iterations;
    out.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

std::optional<ReferenceObjectives> bundled_reference(const std::string& case_name) {
    // Published objective values ($/hr); the ACOPF column is the benchmark.
    static const std::map<std::string, ReferenceObjectives> table = {
        {"case5", {17551.89, 17547.4, 17479.9, 16635.78}},
        {"case57", {12100.86, 12096.04, 10211.99, 10458.06}},
        {"case118", {129660.70, 129680.13, 125947.88, 129713.07}},
    };
    auto it = table.find(case_name);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

double relative_gap(double value, double reference) { return (value - reference) / reference; }

std::vector<GapRow> gap_report(const std::string& case_name, const std::vector<OpfSolution>& solutions) {
    const auto ref = bundled_reference(case_name);
    std::vector<GapRow> rows;
    if (ref) {
        GapRow ac{case_name, "ACOPF", SolveStatus::Optimal, ref->acopf, ref->acopf, 0.0, ref->acopf,
                  "bundled reference, not recomputed"};
        rows.push_back(ac);
    }
    for (const auto& s : solutions) {
        GapRow r;
        r.case_name = case_name;
        r.method = s.method;
        r.status = s.status;
        r.objective = s.objective;
        if (ref) {
            r.reference = ref->acopf;
            if (s.status == SolveStatus::Optimal) r.gap = relative_gap(s.objective, ref->acopf);
            r.published_objective = s.method == "DDCR" ? ref->ddcr_published : ref->dcopf_published;
        } else {
            r.note = "no bundled reference for this case; gap omitted";
        }
        if (s.status != SolveStatus::Optimal) r.note = "solver status " + to_string(s.status);
        rows.push_back(r);
    }
    if (ref) {
        GapRow sdp{case_name, "SDPOPF", SolveStatus::MaxIter, ref->sdpopf_published, ref->acopf, std::nullopt,
                   ref->sdpopf_published, "not computed; published value listed for comparison only"};
        rows.push_back(sdp);
    }
    return rows;
}

std::string gap_report_csv(const std::vector<GapRow>& rows) {
    std::string out = "case,method,status,objective,acopf_reference,gap,gap_percent,published_objective,note\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    auto quoted = [](const std::string& s) { return s.find(',') == std::string::npos ? s : '"' + s + '"'; };
    for (const auto& r : rows) {
        const bool computed = r.method != "SDPOPF";
        out += r.case_name + ',' + r.method + ',' + (computed ? to_string(r.status) : std::string("NotComputed")) + ',' +
               (computed ? format_double(r.objective) : std::string()) + ',' + opt(r.reference) + ',' + opt(r.gap) + ',' +
               (r.gap ? format_double(*r.gap * 100.0) : std::string()) + ',' + opt(r.published_objective) + ',' + quoted(r.note) +
               '\n';
    }
    return out;
}

nlohmann::json solution_to_json(const OpfSolution& s) {
    nlohmann::json j{{"method", s.method},
                     {"status", to_string(s.status)},
                     {"objective", s.objective},
                     {"dispatch", {{"p_gen", to_std(s.p_gen)}, {"q_gen", to_std(s.q_gen)}}},
                     {"voltages", to_std(s.voltages)},
                     {"flows", {{"p", to_std(s.p_flow)}, {"q", to_std(s.q_flow)}}},
                     {"kkt_residual", s.kkt_residual},
                     {"max_violation", s.max_violation},
                     {"iterations", s.iterations},
                     {"runtime_s", s.runtime_s}};
    if (s.status == SolveStatus::Infeasible) j["infeasibility_certificate"] = s.infeasibility;
    if (s.method == "DDCR") j["max_balance_slack"] = s.max_balance_slack;
    if (s.gap_vs_reference) j["gap_vs_reference"] = *s.gap_vs_reference;
    return j;
}

}  // namespace elpf
