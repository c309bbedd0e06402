#include "elpf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace elpf {

namespace {

struct FamilyData {
    Eigen::MatrixXd train_x, test_x, train_y, test_y;
};

const Eigen::MatrixXd& bus_labels(const Dataset& ds, Family f) { return f == Family::BusP ? ds.bus_p : ds.bus_q; }

// Branch predictions of all branches are gathered column-wise so the family
// RMSE is the average over branches.
struct BranchPredictions {
    Eigen::MatrixXd p, q;
};

void put_branch(BranchPredictions& bp, std::size_t l, const Eigen::MatrixXd& pred) {
    bp.p.col(static_cast<Eigen::Index>(l)) = pred.col(0);
    bp.q.col(static_cast<Eigen::Index>(l)) = pred.col(1);
}

std::string svg_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

void check_grid(const std::vector<std::size_t>& grid, std::size_t min_value) {
    if (grid.empty()) throw InputError("sweep: grid must not be empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < min_value) throw InputError("sweep: grid value " + std::to_string(grid[i]) + " is too small");
        if (i && grid[i] <= grid[i - 1]) throw InputError("sweep: grid must be strictly increasing");
    }
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::PR: return "PR";
        case Method::GB: return "GB";
        case Method::Bagging: return "Bagging";
    }
    return "PR";
}

std::string to_string(Family f) {
    switch (f) {
        case Family::BusP: return "bus_P";
        case Family::BusQ: return "bus_Q";
        case Family::BranchP: return "branch_P";
        case Family::BranchQ: return "branch_Q";
    }
    return "bus_P";
}

std::string to_string(Split s) { return s == Split::Test ? "test" : "train"; }

std::string to_string(SweepCurve::Param p) { return p == SweepCurve::Param::T ? "T" : "BT"; }

Method method_from_string(const std::string& s) {
    for (auto m : kMethods)
        if (to_string(m) == s) return m;
    throw InputError("unknown method '" + s + "'");
}

Family family_from_string(const std::string& s) {
    for (auto f : kFamilies)
        if (to_string(f) == s) return f;
    throw InputError("unknown family '" + s + "'");
}

Split split_from_string(const std::string& s) {
    if (s == "test") return Split::Test;
    if (s == "train") return Split::Train;
    throw InputError("unknown split '" + s + "'");
}

double rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw InputError("rmse: shape mismatch (" + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                         " vs " + std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()) + ")");
    if (pred.rows() < 1 || pred.cols() < 1) throw InputError("rmse: empty sample");
    double total = 0.0;
    for (Eigen::Index j = 0; j < pred.cols(); ++j)
        total += std::sqrt((pred.col(j) - truth.col(j)).squaredNorm() / static_cast<double>(pred.rows()));
    return total / static_cast<double>(pred.cols());
}

const RmseEntry& RmseReport::at(Method m, Family f, Split s) const {
    for (const auto& e : entries)
        if (e.method == m && e.family == f && e.split == s) return e;
    throw std::out_of_range("report has no cell " + to_string(m) + "/" + to_string(f) + "/" + to_string(s));
}

double RmseReport::median(Method m, Family f, Split s) const {
    const auto& e = at(m, f, s);
    return e.median ? *e.median : e.rmse;
}

CompareResult compare_methods(const NetworkCase& c, const CompareConfig& cfg) {
    const Dataset ds = generate(c, cfg.sampler);
    const auto [train, test] = split(ds, cfg.sampler);

    CompareResult res;
    res.data = ds.meta;
    res.warnings = ds.meta.warnings;
    res.report.case_name = c.name;

    std::map<std::tuple<Method, Family, Split>, double> cells;
    auto record = [&](Method m, Family f, const Eigen::MatrixXd& pred_test, const Eigen::MatrixXd& pred_train,
                      const Eigen::MatrixXd& y_test, const Eigen::MatrixXd& y_train) {
        cells[{m, f, Split::Test}] = rmse(pred_test, y_test);
        cells[{m, f, Split::Train}] = rmse(pred_train, y_train);
    };

    for (Family f : {Family::BusP, Family::BusQ}) {
        const Eigen::MatrixXd& ytr = bus_labels(train, f);
        const Eigen::MatrixXd& yte = bus_labels(test, f);
        const LinearModel pr = fit_ols(train.features, ytr, cfg.boost.ridge_lambda);
        record(Method::PR, f, pr.predict_rows(test.features), pr.predict_rows(train.features), yte, ytr);

        const EnsembleModel gb = fit_gradient_boosting(train.features, ytr, cfg.boost);
        record(Method::GB, f, gb.predict_rows(test.features), gb.predict_rows(train.features), yte, ytr);
        (f == Family::BusP ? res.gb_models.bus_p : res.gb_models.bus_q) = gb.collapse();

        std::vector<std::string> warn;
        const EnsembleModel bag = fit_bagging(train.features, ytr, cfg.bag, &warn);
        for (auto& w : warn) res.warnings.push_back(to_string(f) + ": " + w);
        record(Method::Bagging, f, bag.predict_rows(test.features), bag.predict_rows(train.features), yte, ytr);
        res.jensen.push_back({to_string(f), bagging_jensen(bag, test.features, yte)});
    }

    if (cfg.include_branches) {
        const auto nl = c.n_branch();
        const auto rows_te = test.features.rows(), rows_tr = train.features.rows();
        const auto cols = static_cast<Eigen::Index>(nl);
        BranchPredictions truth_te{Eigen::MatrixXd(rows_te, cols), Eigen::MatrixXd(rows_te, cols)};
        BranchPredictions truth_tr{Eigen::MatrixXd(rows_tr, cols), Eigen::MatrixXd(rows_tr, cols)};
        std::map<Method, std::pair<BranchPredictions, BranchPredictions>> preds;
        for (auto m : kMethods) preds[m] = {truth_te, truth_tr};
        for (std::size_t l = 0; l < nl; ++l) {
            const FeatureMap fm = branch_feature_map(c, l, cfg.branch_features);
            const Eigen::MatrixXd xtr = branch_design(train, fm), xte = branch_design(test, fm);
            const Eigen::MatrixXd ytr = branch_labels(train, l), yte = branch_labels(test, l);
            put_branch(truth_te, l, yte);
            put_branch(truth_tr, l, ytr);

            const LinearModel pr = fit_ols(xtr, ytr, cfg.boost.ridge_lambda);
            put_branch(preds[Method::PR].first, l, pr.predict_rows(xte));
            put_branch(preds[Method::PR].second, l, pr.predict_rows(xtr));

            EnsembleModel gb = fit_gradient_boosting(xtr, ytr, cfg.boost);
            gb.feature_map = fm;
            put_branch(preds[Method::GB].first, l, gb.predict_rows(xte));
            put_branch(preds[Method::GB].second, l, gb.predict_rows(xtr));
            res.gb_models.branch.push_back(gb.collapse());

            std::vector<std::string> warn;
            const EnsembleModel bag = fit_bagging(xtr, ytr, cfg.bag, &warn);
            for (auto& w : warn) res.warnings.push_back("branch " + std::to_string(l + 1) + ": " + w);
            put_branch(preds[Method::Bagging].first, l, bag.predict_rows(xte));
            put_branch(preds[Method::Bagging].second, l, bag.predict_rows(xtr));
            res.jensen.push_back({"branch " + std::to_string(l + 1), bagging_jensen(bag, xte, yte)});
        }
        for (auto m : kMethods) {
            const auto& [te, tr] = preds[m];
            record(m, Family::BranchP, te.p, tr.p, truth_te.p, truth_tr.p);
            record(m, Family::BranchQ, te.q, tr.q, truth_te.q, truth_tr.q);
        }
    }

    for (auto m : kMethods)
        for (auto f : kFamilies)
            for (auto s : kSplits) {
                auto it = cells.find({m, f, s});
                if (it != cells.end()) res.report.entries.push_back({m, f, s, it->second, std::nullopt});
            }
    return res;
}

RmseReport compare_over_seeds(const NetworkCase& c, const CompareConfig& cfg, std::size_t n_seeds, int jobs,
                              std::vector<RmseReport>* per_seed, CompareResult* base_run) {
    if (n_seeds < 1) throw InputError("compare: need at least one seed");
    std::vector<CompareResult> runs(n_seeds);
    // Several seeds: one worker per seed. A single seed hands the workers to
    // sampling and bagging instead. Results do not depend on either choice.
    const int inner = n_seeds > 1 ? 1 : jobs;
    parallel_for(n_seeds, n_seeds > 1 ? jobs : 1, [&](std::size_t k) {
        CompareConfig local = cfg;
        local.sampler.seed = cfg.sampler.seed + k;
        local.bag.seed = cfg.bag.seed + k;
        local.sampler.jobs = inner;
        local.bag.jobs = inner;
        runs[k] = compare_methods(c, local);
    });
    RmseReport out = runs.front().report;
    out.n_seeds = n_seeds;
    if (n_seeds > 1) {
        for (auto& e : out.entries) {
            std::vector<double> vals;
            for (const auto& r : runs) vals.push_back(r.report.value(e.method, e.family, e.split));
            e.median = median(vals);
        }
    }
    if (per_seed) {
        per_seed->clear();
        for (const auto& r : runs) per_seed->push_back(r.report);
    }
    if (base_run) *base_run = std::move(runs.front());
    return out;
}

std::string report_to_csv(const std::vector<RmseReport>& reports) {
    const bool medians = std::any_of(reports.begin(), reports.end(), [](const RmseReport& r) { return r.n_seeds > 1; });
    std::ostringstream os;
    os << "case,method,family,split,rmse,rmse_x1e5";
    if (medians) os << ",median_rmse,median_rmse_x1e5,seeds";
    os << "\n";
    for (const auto& r : reports)
        for (const auto& e : r.entries) {
            os << r.case_name << ',' << to_string(e.method) << ',' << to_string(e.family) << ',' << to_string(e.split)
               << ',' << format_double(e.rmse) << ',' << format_double(e.rmse * 1e5);
            if (medians) {
                const double med = e.median ? *e.median : e.rmse;
                os << ',' << format_double(med) << ',' << format_double(med * 1e5) << ',' << r.n_seeds;
            }
            os << "\n";
        }
    return os.str();
}

std::vector<RmseReport> reports_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw InputError("report csv: empty input");
    const auto header = split_csv_line(line);
    const bool medians = header.size() >= 9;
    if (header.size() < 6 || header[0] != "case" || header[4] != "rmse")
        throw InputError("report csv: unexpected header '" + line + "'");
    std::vector<RmseReport> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) throw InputError("report csv: wrong field count in '" + line + "'");
        if (out.empty() || out.back().case_name != f[0]) {
            out.emplace_back();
            out.back().case_name = f[0];
        }
        RmseEntry e{method_from_string(f[1]), family_from_string(f[2]), split_from_string(f[3]), std::stod(f[4]),
                    std::nullopt};
        if (medians) {
            out.back().n_seeds = static_cast<std::size_t>(std::stoul(f[8]));
            if (out.back().n_seeds > 1) e.median = std::stod(f[6]);
        }
        out.back().entries.push_back(e);
    }
    return out;
}

double SweepCurve::at(std::size_t value, Family f, Split s) const {
    for (const auto& p : points)
        if (p.value == value && p.family == f && p.split == s) return p.rmse;
    throw std::out_of_range("sweep has no point at " + std::to_string(value));
}

SweepCurve sweep_boosting(const NetworkCase& c, const SamplerConfig& sampler, const BoostConfig& boost,
                          const std::vector<std::size_t>& grid) {
    check_grid(grid, 0);
    const Dataset ds = generate(c, sampler);
    const auto [train, test] = split(ds, sampler);
    SweepCurve out;
    out.case_name = c.name;
    out.param = SweepCurve::Param::T;
    out.grid = grid;
    BoostConfig cfg = boost;
    cfg.n_learners = grid.back();
    for (Family f : {Family::BusP, Family::BusQ}) {
        const Eigen::MatrixXd& ytr = bus_labels(train, f);
        const Eigen::MatrixXd& yte = bus_labels(test, f);
        const EnsembleModel gb = fit_gradient_boosting(train.features, ytr, cfg);
        // Same accumulation order as EnsembleModel::predict_rows, so each
        // snapshot equals a fit with n_learners = T.
        Eigen::MatrixXd p_tr = gb.base_constant.transpose().replicate(train.features.rows(), 1);
        Eigen::MatrixXd p_te = gb.base_constant.transpose().replicate(test.features.rows(), 1);
        std::size_t next = 0;
        for (std::size_t t = 0; t <= grid.back(); ++t) {
            if (t > 0) {
                const auto& st = gb.stages[t - 1];
                p_tr += st.step * st.learner.predict_rows(train.features);
                p_te += st.step * st.learner.predict_rows(test.features);
            }
            if (next < grid.size() && grid[next] == t) {
                out.points.push_back({t, f, Split::Test, rmse(p_te, yte)});
                out.points.push_back({t, f, Split::Train, rmse(p_tr, ytr)});
                ++next;
            }
        }
    }
    return out;
}

SweepCurve sweep_bagging(const NetworkCase& c, const SamplerConfig& sampler, const BagConfig& bag,
                         const std::vector<std::size_t>& grid) {
    check_grid(grid, 1);
    const Dataset ds = generate(c, sampler);
    const auto [train, test] = split(ds, sampler);
    SweepCurve out;
    out.case_name = c.name;
    out.param = SweepCurve::Param::BT;
    out.grid = grid;
    BagConfig cfg = bag;
    cfg.n_bootstraps = grid.back();
    for (Family f : {Family::BusP, Family::BusQ}) {
        const Eigen::MatrixXd& ytr = bus_labels(train, f);
        const Eigen::MatrixXd& yte = bus_labels(test, f);
        const EnsembleModel model = fit_bagging(train.features, ytr, cfg);
        Eigen::MatrixXd sum_tr = Eigen::MatrixXd::Zero(ytr.rows(), ytr.cols());
        Eigen::MatrixXd sum_te = Eigen::MatrixXd::Zero(yte.rows(), yte.cols());
        std::size_t next = 0;
        for (std::size_t b = 0; b < model.members.size(); ++b) {
            const Eigen::MatrixXd m_tr = model.members[b].predict_rows(train.features);
            const Eigen::MatrixXd m_te = model.members[b].predict_rows(test.features);
            out.scatter.push_back({b + 1, f, Split::Test, rmse(m_te, yte)});
            out.scatter.push_back({b + 1, f, Split::Train, rmse(m_tr, ytr)});
            sum_tr += m_tr;
            sum_te += m_te;
            if (next < grid.size() && grid[next] == b + 1) {
                const double k = static_cast<double>(b + 1);
                out.points.push_back({b + 1, f, Split::Test, rmse(sum_te / k, yte)});
                out.points.push_back({b + 1, f, Split::Train, rmse(sum_tr / k, ytr)});
                ++next;
            }
        }
    }
    return out;
}

std::string sweep_to_csv(const std::vector<SweepCurve>& curves) {
    std::ostringstream os;
    os << "case,param,value,family,split,rmse\n";
    for (const auto& c : curves)
        for (const auto& p : c.points)
            os << c.case_name << ',' << to_string(c.param) << ',' << p.value << ',' << to_string(p.family) << ','
               << to_string(p.split) << ',' << format_double(p.rmse) << "\n";
    return os.str();
}

std::string scatter_to_csv(const std::vector<SweepCurve>& curves) {
    std::ostringstream os;
    os << "case,member,family,split,rmse\n";
    for (const auto& c : curves)
        for (const auto& p : c.scatter)
            os << c.case_name << ',' << p.member << ',' << to_string(p.family) << ',' << to_string(p.split) << ','
               << format_double(p.rmse) << "\n";
    return os.str();
}

std::vector<SweepPoint> sweep_points_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "case,param,value,family,split,rmse")
        throw InputError("sweep csv: unexpected header");
    std::vector<SweepPoint> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 6) throw InputError("sweep csv: wrong field count in '" + line + "'");
        out.push_back({static_cast<std::size_t>(std::stoul(f[2])), family_from_string(f[3]), split_from_string(f[4]),
                       std::stod(f[5])});
    }
    return out;
}

std::string svg_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<ChartSeries>& series, bool log_y) {
    constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

    auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (auto [x, y] : s.points) {
            if (log_y && !(y > 0.0)) continue;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, ty(y));
            y1 = std::max(y1, ty(y));
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << svg_escape(title) << "</text>\n";
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0;
        const double yv = y0 + (y1 - y0) * k / 4.0;
        const double yy = kTop + (1.0 - k / 4.0) * ph;
        os << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\">"
           << fmt(log_y ? std::pow(10.0, yv) : yv, 3) << "</text>\n";
        os << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << yy << "\" y2=\"" << yy
           << "\" stroke=\"#ddd\"/>\n";
    }
    os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << svg_escape(x_label)
       << "</text>\n";
    os << "<text transform=\"translate(16," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << svg_escape(y_label + (log_y ? " (log)" : "")) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* color = kColors[i % (sizeof kColors / sizeof *kColors)];
        std::ostringstream path;
        bool first = true;
        for (auto [x, y] : s.points) {
            if (log_y && !(y > 0.0)) continue;
            if (s.markers_only) {
                os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"2\" fill=\"" << color << "\"/>\n";
            } else {
                path << (first ? "M" : " L") << px(x) << ',' << py(y);
                first = false;
            }
        }
        if (!s.markers_only && !first)
            os << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
        const double ly = kTop + 14 + 16 * static_cast<double>(i);
        os << "<rect x=\"" << kLeft + pw + 12 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << color
           << "\"/>\n";
        os << "<text x=\"" << kLeft + pw + 28 << "\" y=\"" << ly << "\">" << svg_escape(s.name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string sweep_svg(const SweepCurve& curve) {
    std::vector<ChartSeries> series;
    for (Family f : {Family::BusP, Family::BusQ})
        for (Split s : kSplits) {
            ChartSeries cs{to_string(f) + " " + to_string(s), {}, false};
            for (const auto& p : curve.points)
                if (p.family == f && p.split == s) cs.points.emplace_back(static_cast<double>(p.value), p.rmse);
            series.push_back(std::move(cs));
        }
    if (!curve.scatter.empty()) {
        for (Family f : {Family::BusP, Family::BusQ}) {
            ChartSeries cs{to_string(f) + " members (test)", {}, true};
            for (const auto& p : curve.scatter)
                if (p.family == f && p.split == Split::Test) cs.points.emplace_back(static_cast<double>(p.member), p.rmse);
            series.push_back(std::move(cs));
        }
    }
    const bool boosting = curve.param == SweepCurve::Param::T;
    return svg_chart(curve.case_name + (boosting ? ": RMSE vs boosting stages" : ": RMSE vs bootstraps"),
                     boosting ? "T" : "BT", "RMSE (p.u.)", series, true);
}

std::string report_svg(const RmseReport& report) {
    std::vector<ChartSeries> series;
    for (auto m : kMethods) {
        ChartSeries cs{to_string(m), {}, false};
        double x = 0;
        for (auto f : kFamilies) {
            ++x;
            for (const auto& e : report.entries)
                if (e.method == m && e.family == f && e.split == Split::Test)
                    cs.points.emplace_back(x, e.median ? *e.median : e.rmse);
        }
        series.push_back(std::move(cs));
    }
    return svg_chart(report.case_name + ": test RMSE (1 bus_P, 2 bus_Q, 3 branch_P, 4 branch_Q)", "family", "RMSE (p.u.)",
                     series, true);
}

}  // namespace elpf
