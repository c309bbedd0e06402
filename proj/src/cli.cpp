#include "elpf/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "elpf/eval.hpp"
#include "elpf/util.hpp"

namespace elpf {

namespace fs = std::filesystem;

nlohmann::json RunManifest::to_json() const {
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : artifacts) arts.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    nlohmann::json st = nlohmann::json::array();
    for (const auto& [name, secs] : stages) st.push_back({{"stage", name}, {"seconds", secs}});
    return {{"command", command}, {"args", args},       {"case_paths", case_paths}, {"config", config},
            {"seed", seed},       {"version", version}, {"artifacts", arts},        {"wall_clock", st}};
}

nlohmann::json surrogates_to_json(const SurrogateModels& m) {
    nlohmann::json branch = nlohmann::json::array();
    for (const auto& b : m.branch) branch.push_back(model_to_json(b));
    return {{"bus_p", model_to_json(m.bus_p)}, {"bus_q", model_to_json(m.bus_q)}, {"branch", branch}};
}

SurrogateModels surrogates_from_json(const nlohmann::json& j) {
    SurrogateModels m;
    try {
        m.bus_p = model_from_json(j.at("bus_p"));
        m.bus_q = model_from_json(j.at("bus_q"));
        for (const auto& b : j.at("branch")) m.branch.push_back(model_from_json(b));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("model file: ") + e.what());
    }
    return m;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Flags {
    std::vector<std::string> cases;
    std::size_t samples = 0;
    std::uint64_t seed = 1;
    std::size_t learners = 200;
    std::size_t bootstraps = 50;
    double theta = 0.1;
    double ridge = 0.0;
    double split = 0.5;
    bool line_search = false;
    std::string branch_features = "endpoints";
    std::string method = "gb";
    std::string programs = "all";
    int jobs = 1;
    std::string out;
    std::size_t seeds = 1;
    std::string model;
    std::string param = "both";
    std::string grid_t = "0:200:10";
    std::string grid_bt = "1:50:1";
};

void add_sampling(CLI::App* cmd, Flags& f) {
    cmd->add_option("--samples", f.samples, "Number of samples (0 = case default: 175/250/400)");
    cmd->add_option("--seed", f.seed, "Base seed for sampling, splitting and bootstraps");
    cmd->add_option("--split", f.split, "Training fraction")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f.out, std::string("Output directory (default: $") + kOutputRootEnv + "/<command>)");
}

void add_learning(CLI::App* cmd, Flags& f) {
    cmd->add_option("-T,--learners", f.learners, "Boosting stages");
    cmd->add_option("--bootstraps,--BT", f.bootstraps, "Bagging members");
    cmd->add_option("--theta", f.theta, "Boosting step size");
    cmd->add_option("--ridge", f.ridge, "Ridge penalty of every base learner")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--line-search", f.line_search, "Exact line search for the boosting step");
    cmd->add_option("--branch-features", f.branch_features, "Branch model inputs")
        ->check(CLI::IsMember({"endpoints", "all"}));
}

SamplerConfig sampler_config(const Flags& f) {
    SamplerConfig s;
    s.n_samples = f.samples;
    s.seed = f.seed;
    s.split_fraction = f.split;
    s.jobs = f.jobs;
    s.validate();
    return s;
}

BoostConfig boost_config(const Flags& f) {
    BoostConfig b;
    b.n_learners = f.learners;
    b.theta = f.theta;
    b.ridge_lambda = f.ridge;
    b.step_mode = f.line_search ? BoostConfig::StepMode::LineSearch : BoostConfig::StepMode::Constant;
    b.validate();
    return b;
}

BagConfig bag_config(const Flags& f) {
    BagConfig b;
    b.n_bootstraps = f.bootstraps;
    b.seed = f.seed;
    b.ridge_lambda = f.ridge;
    b.jobs = f.jobs;
    return b;
}

FeatureMap::Kind branch_kind(const Flags& f) {
    return f.branch_features == "all" ? FeatureMap::Kind::AllBuses : FeatureMap::Kind::BranchEndpoints;
}

CompareConfig compare_config(const Flags& f) {
    return {sampler_config(f), boost_config(f), bag_config(f), branch_kind(f), true};
}

nlohmann::json config_json(const Flags& f) {
    return {{"samples", f.samples},   {"seed", f.seed},
            {"learners", f.learners}, {"bootstraps", f.bootstraps},
            {"theta", f.theta},       {"ridge", f.ridge},
            {"split", f.split},       {"line_search", f.line_search},
            {"branch_features", f.branch_features},
            {"jobs", f.jobs},         {"seeds", f.seeds},
            {"method", f.method},     {"programs", f.programs},
            {"model", f.model}};
}

std::vector<std::size_t> parse_grid(const std::string& text) {
    std::vector<std::size_t> grid;
    auto to_size = [&](const std::string& s) -> std::size_t {
        std::size_t pos = 0;
        long long v = -1;
        try {
            v = std::stoll(s, &pos);
        } catch (const std::exception&) {
        }
        if (v < 0 || pos != s.size()) throw InputError("grid: bad value '" + s + "' in '" + text + "'");
        return static_cast<std::size_t>(v);
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw InputError("grid: expected start:stop:step, got '" + text + "'");
        const std::size_t a = to_size(parts[0]), b = to_size(parts[1]), step = to_size(parts[2]);
        if (step == 0) throw InputError("grid: step must be positive");
        for (std::size_t v = a; v <= b; v += step) grid.push_back(v);
        if (!grid.empty() && grid.back() != b && b > a) grid.push_back(b);
    } else {
        for (const auto& p : split_csv_line(text)) grid.push_back(to_size(p));
    }
    if (grid.empty()) throw InputError("grid: empty '" + text + "'");
    return grid;
}

fs::path output_dir(const Flags& f, const std::string& command) {
    if (!f.out.empty()) return f.out;
    const char* root = std::getenv(kOutputRootEnv);
    return fs::path(root && *root ? root : "elpf_out") / command;
}

/// Writes artifacts under one directory and keeps the manifest in step.
class Run {
  public:
    Run(std::string command, const std::vector<std::string>& args, fs::path dir, const Flags& f) : dir_(std::move(dir)) {
        man_.command = std::move(command);
        man_.args = args;
        man_.config = config_json(f);
        man_.seed = f.seed;
        fs::create_directories(dir_);
    }

    const fs::path& dir() const { return dir_; }
    RunManifest& manifest() { return man_; }

    void write(const std::string& rel, const std::string& contents) {
        const fs::path p = dir_ / rel;
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        write_file(p.string(), contents);
        man_.artifacts.push_back({rel, sha256_hex(contents), contents.size()});
    }

    /// Registers a file some library routine already wrote.
    void record(const fs::path& p) {
        man_.artifacts.push_back({fs::relative(p, dir_).generic_string(), sha256_file(p.string()),
                                  static_cast<std::size_t>(fs::file_size(p))});
    }

    template <class F>
    auto stage(const std::string& name, F&& body) {
        const auto t0 = Clock::now();
        struct Done {
            Run* run;
            std::string name;
            Clock::time_point t0;
            ~Done() { run->man_.stages.emplace_back(name, std::chrono::duration<double>(Clock::now() - t0).count()); }
        } done{this, name, t0};
        return body();
    }

    void finish() {
        std::sort(man_.artifacts.begin(), man_.artifacts.end(),
                  [](const auto& a, const auto& b) { return a.path < b.path; });
        write_file((dir_ / "manifest.json").string(), man_.to_json().dump(2) + "\n");
    }

  private:
    fs::path dir_;
    RunManifest man_;
};

NetworkCase open_case(Run& run, const std::string& name) {
    run.manifest().case_paths.push_back(resolve_case_path(name));
    return load_case(name);
}

Method parse_method(const std::string& s) {
    if (s == "pr") return Method::PR;
    if (s == "gb") return Method::GB;
    if (s == "bag") return Method::Bagging;
    throw InputError("unknown method '" + s + "' (expected pr, gb or bag)");
}

LinearModel fit_one(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Method m, const BoostConfig& boost,
                    const BagConfig& bag, std::vector<std::string>& warnings) {
    switch (m) {
        case Method::PR: return fit_ols(x, y, boost.ridge_lambda);
        case Method::GB: return fit_gradient_boosting(x, y, boost).collapse();
        case Method::Bagging: return fit_bagging(x, y, bag, &warnings).collapse();
    }
    return {};
}

SurrogateModels fit_surrogates(const NetworkCase& c, const Dataset& train, Method m, const Flags& f,
                               std::vector<std::string>& warnings) {
    const BoostConfig boost = boost_config(f);
    const BagConfig bag = bag_config(f);
    SurrogateModels s;
    s.bus_p = fit_one(train.features, train.bus_p, m, boost, bag, warnings);
    s.bus_q = fit_one(train.features, train.bus_q, m, boost, bag, warnings);
    for (std::size_t l = 0; l < c.n_branch(); ++l) {
        const FeatureMap fm = branch_feature_map(c, l, branch_kind(f));
        LinearModel lm = fit_one(branch_design(train, fm), branch_labels(train, l), m, boost, bag, warnings);
        lm.feature_map = fm;
        s.branch.push_back(std::move(lm));
    }
    return s;
}

std::string jensen_csv(const std::vector<std::pair<std::string, CompareResult>>& runs) {
    std::string out = "case,target,bagged_loss,mean_member_loss,holds\n";
    for (const auto& [name, r] : runs)
        for (const auto& j : r.jensen)
            out += name + ',' + j.target + ',' + format_double(j.test.bagged_loss) + ',' +
                   format_double(j.test.mean_member_loss) + ',' + (j.test.holds() ? "true" : "false") + '\n';
    return out;
}

void print_warnings(std::ostream& err, const std::string& prefix, const std::vector<std::string>& w) {
    for (const auto& s : w) err << "warning: " << prefix << s << "\n";
}

/// Solves the requested programs and writes one JSON per method. Wall-clock
/// goes to the manifest only so solution files stay reproducible.
std::vector<OpfSolution> run_opf(Run& run, const NetworkCase& c, const SurrogateModels* models, bool dc, bool ddcr,
                                 const std::string& prefix) {
    std::vector<OpfSolution> sols;
    auto save = [&](OpfSolution s, const std::string& tag) {
        nlohmann::json j = solution_to_json(s);
        j.erase("runtime_s");
        j["case"] = c.name;
        run.write(prefix + "solution_" + tag + ".json", j.dump(2) + "\n");
        sols.push_back(std::move(s));
    };
    if (dc) save(run.stage(c.name + ": dcopf", [&] { return solve_dcopf(c); }), "dc");
    if (ddcr && models)
        save(run.stage(c.name + ": ddcr", [&] { return solve_ddcr(c, build_ddcr(c, *models)); }), "ddcr");
    return sols;
}

bool all_optimal(const std::vector<OpfSolution>& sols) {
    return std::all_of(sols.begin(), sols.end(), [](const OpfSolution& s) { return s.status == SolveStatus::Optimal; });
}

int cmd_generate(const Flags& f, const std::vector<std::string>& args, std::ostream& out) {
    Run run("generate", args, output_dir(f, "generate"), f);
    const NetworkCase c = open_case(run, f.cases.at(0));
    const Dataset ds = run.stage("generate", [&] { return generate(c, sampler_config(f)); });
    for (const auto& p : save_dataset_csv(ds, (run.dir() / "dataset").string())) run.record(p);
    run.finish();
    out << c.name << ": " << ds.rows() << " samples (" << ds.meta.failed_samples << " redrawn) -> " << run.dir().string()
        << "\n";
    return kExitOk;
}

int cmd_fit(const Flags& f, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Run run("fit", args, output_dir(f, "fit"), f);
    const NetworkCase c = open_case(run, f.cases.at(0));
    const Method m = parse_method(f.method);
    const SamplerConfig sc = sampler_config(f);
    const Dataset ds = run.stage("generate", [&] { return generate(c, sc); });
    const auto [train, test] = split(ds, sc);
    std::vector<std::string> warnings = ds.meta.warnings;
    const SurrogateModels models = run.stage("fit", [&] { return fit_surrogates(c, train, m, f, warnings); });
    print_warnings(err, "", warnings);

    nlohmann::json j = surrogates_to_json(models);
    j["case"] = c.name;
    j["method"] = to_string(m);
    j["config"] = config_json(f);
    run.write("models.json", j.dump(2) + "\n");

    std::string csv = "case,method,family,split,rmse\n";
    for (const auto& [family, model, truth_tr, truth_te] :
         {std::tuple{Family::BusP, &models.bus_p, &train.bus_p, &test.bus_p},
          std::tuple{Family::BusQ, &models.bus_q, &train.bus_q, &test.bus_q}}) {
        for (const auto& [sp, data, truth] : {std::tuple{Split::Test, &test, truth_te}, std::tuple{Split::Train, &train, truth_tr}}) {
            const double r = rmse(model->predict_rows(data->features), *truth);
            csv += c.name + ',' + to_string(m) + ',' + to_string(family) + ',' + to_string(sp) + ',' + format_double(r) + '\n';
        }
    }
    run.write("fit_rmse.csv", csv);
    run.finish();
    out << csv;
    return kExitOk;
}

int cmd_compare(const Flags& f, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Run run("compare", args, output_dir(f, "compare"), f);
    const CompareConfig cfg = compare_config(f);
    std::vector<RmseReport> reports;
    std::vector<std::pair<std::string, CompareResult>> runs;
    for (const auto& name : f.cases) {
        const NetworkCase c = open_case(run, name);
        std::vector<RmseReport> per_seed;
        CompareResult base;
        reports.push_back(run.stage(c.name + ": compare", [&] {
            return compare_over_seeds(c, cfg, f.seeds, f.jobs, &per_seed, &base);
        }));
        print_warnings(err, c.name + ": ", base.warnings);
        run.write("compare_" + c.name + ".svg", report_svg(reports.back()));
        if (f.seeds > 1)
            for (std::size_t k = 0; k < per_seed.size(); ++k)
                run.write("per_seed/compare_" + c.name + "_seed" + std::to_string(f.seed + k) + ".csv",
                          report_to_csv({per_seed[k]}));
        runs.emplace_back(c.name, std::move(base));
    }
    const std::string csv = report_to_csv(reports);
    run.write("compare.csv", csv);
    run.write("jensen.csv", jensen_csv(runs));
    run.finish();
    out << csv;
    return kExitOk;
}

int cmd_tune(const Flags& f, const std::vector<std::string>& args, std::ostream& out) {
    Run run("tune", args, output_dir(f, "tune"), f);
    const bool do_t = f.param == "T" || f.param == "both";
    const bool do_bt = f.param == "BT" || f.param == "both";
    const auto grid_t = do_t ? parse_grid(f.grid_t) : std::vector<std::size_t>{};
    const auto grid_bt = do_bt ? parse_grid(f.grid_bt) : std::vector<std::size_t>{};
    run.manifest().config["grid_t"] = grid_t;
    run.manifest().config["grid_bt"] = grid_bt;
    std::vector<SweepCurve> t_curves, bt_curves;
    for (const auto& name : f.cases) {
        const NetworkCase c = open_case(run, name);
        const SamplerConfig sc = sampler_config(f);
        if (do_t) {
            t_curves.push_back(run.stage(c.name + ": sweep T", [&] { return sweep_boosting(c, sc, boost_config(f), grid_t); }));
            run.write("sweep_T_" + c.name + ".svg", sweep_svg(t_curves.back()));
        }
        if (do_bt) {
            bt_curves.push_back(run.stage(c.name + ": sweep BT", [&] { return sweep_bagging(c, sc, bag_config(f), grid_bt); }));
            run.write("sweep_BT_" + c.name + ".svg", sweep_svg(bt_curves.back()));
        }
    }
    if (do_t) run.write("sweep_T.csv", sweep_to_csv(t_curves));
    if (do_bt) {
        run.write("sweep_BT.csv", sweep_to_csv(bt_curves));
        run.write("scatter_BT.csv", scatter_to_csv(bt_curves));
    }
    run.finish();
    out << "sweeps written to " << run.dir().string() << "\n";
    return kExitOk;
}

int cmd_opf(const Flags& f, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Run run("opf", args, output_dir(f, "opf"), f);
    const NetworkCase c = open_case(run, f.cases.at(0));
    const bool dc = f.programs == "all" || f.programs == "dc";
    const bool ddcr = f.programs == "all" || f.programs == "ddcr";
    SurrogateModels models;
    if (ddcr) {
        if (!f.model.empty()) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(read_file(f.model));
            } catch (const nlohmann::json::exception& e) {
                throw InputError("model file " + f.model + ": " + e.what());
            }
            models = surrogates_from_json(j);
            run.manifest().config["model_sha256"] = sha256_file(f.model);
        } else {
            // No model given: fit GB with the configured (default) settings.
            const SamplerConfig sc = sampler_config(f);
            const Dataset ds = run.stage("generate", [&] { return generate(c, sc); });
            std::vector<std::string> warnings;
            models = run.stage("fit", [&] { return fit_surrogates(c, split(ds, sc).first, Method::GB, f, warnings); });
            print_warnings(err, "", warnings);
        }
    }
    const auto sols = run_opf(run, c, ddcr ? &models : nullptr, dc, ddcr, "");
    const std::string csv = gap_report_csv(gap_report(c.name, sols));
    run.write("gap.csv", csv);
    run.finish();
    out << csv;
    if (!all_optimal(sols)) {
        for (const auto& s : sols)
            if (s.status != SolveStatus::Optimal) err << c.name << " " << s.method << ": " << to_string(s.status) << "\n";
        return kExitSolve;
    }
    return kExitOk;
}

int cmd_reproduce(Flags f, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    if (f.cases.empty()) f.cases = {"case5", "case57", "case118"};
    Run run("reproduce", args, output_dir(f, "reproduce"), f);
    const CompareConfig cfg = compare_config(f);
    const auto grid_t = parse_grid(f.grid_t);
    const auto grid_bt = parse_grid(f.grid_bt);
    run.manifest().config["grid_t"] = grid_t;
    run.manifest().config["grid_bt"] = grid_bt;

    std::vector<RmseReport> reports;
    std::vector<std::pair<std::string, CompareResult>> runs;
    std::vector<SweepCurve> t_curves, bt_curves;
    std::string gaps;
    bool optimal = true;
    for (const auto& name : f.cases) {
        const NetworkCase c = open_case(run, name);
        CompareResult base;
        reports.push_back(run.stage(c.name + ": compare",
                                    [&] { return compare_over_seeds(c, cfg, f.seeds, f.jobs, nullptr, &base); }));
        print_warnings(err, c.name + ": ", base.warnings);
        run.write("compare_" + c.name + ".svg", report_svg(reports.back()));

        t_curves.push_back(run.stage(c.name + ": sweep T", [&] { return sweep_boosting(c, cfg.sampler, cfg.boost, grid_t); }));
        bt_curves.push_back(run.stage(c.name + ": sweep BT", [&] { return sweep_bagging(c, cfg.sampler, cfg.bag, grid_bt); }));
        run.write("sweep_T_" + c.name + ".svg", sweep_svg(t_curves.back()));
        run.write("sweep_BT_" + c.name + ".svg", sweep_svg(bt_curves.back()));

        nlohmann::json mj = surrogates_to_json(base.gb_models);
        mj["case"] = c.name;
        mj["method"] = "GB";
        run.write("models/" + c.name + "_gb.json", mj.dump(2) + "\n");
        const auto sols = run_opf(run, c, &base.gb_models, true, true, "opf/" + c.name + "_");
        optimal = optimal && all_optimal(sols);
        const std::string csv = gap_report_csv(gap_report(c.name, sols));
        gaps += gaps.empty() ? csv : csv.substr(csv.find('\n') + 1);
        out << c.name << " done\n";
        runs.emplace_back(c.name, std::move(base));
    }
    run.write("compare.csv", report_to_csv(reports));
    run.write("jensen.csv", jensen_csv(runs));
    run.write("sweep_T.csv", sweep_to_csv(t_curves));
    run.write("sweep_BT.csv", sweep_to_csv(bt_curves));
    run.write("scatter_BT.csv", scatter_to_csv(bt_curves));
    run.write("gap.csv", gaps);
    run.finish();
    out << gaps << "artifacts in " << run.dir().string() << "\n";
    if (!optimal) {
        err << "some OPF solves did not reach Optimal; see gap.csv\n";
        return kExitSolve;
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Ensemble-learned power flow surrogates and the relaxed OPF built from them", "elpf"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ELPF_VERSION));
    Flags f;

    auto* gen = app.add_subcommand("generate", "Sample loads, solve AC power flow, write the dataset");
    gen->add_option("--case", f.cases, "Case name or path")->required()->expected(1);
    add_sampling(gen, f);

    auto* fit = app.add_subcommand("fit", "Fit surrogate models (bus and branch) and write models.json");
    fit->add_option("--case", f.cases, "Case name or path")->required()->expected(1);
    fit->add_option("--method", f.method, "Learner")->check(CLI::IsMember({"pr", "gb", "bag"}));
    add_sampling(fit, f);
    add_learning(fit, f);

    auto* cmp = app.add_subcommand("compare", "PR / GB / Bagging RMSE table");
    cmp->add_option("--case", f.cases, "Case names or paths (repeatable)")->required();
    cmp->add_option("--seeds", f.seeds, "Seeds to run; more than one adds median columns")->check(CLI::PositiveNumber);
    add_sampling(cmp, f);
    add_learning(cmp, f);

    auto* tune = app.add_subcommand("tune", "RMSE curves over boosting stages and bootstraps");
    tune->add_option("--case", f.cases, "Case names or paths (repeatable)")->required();
    tune->add_option("--param", f.param, "Which sweep")->check(CLI::IsMember({"T", "BT", "both"}));
    tune->add_option("--grid-t", f.grid_t, "T grid: list a,b,c or range start:stop:step");
    tune->add_option("--grid-bt", f.grid_bt, "BT grid: list or range");
    add_sampling(tune, f);
    add_learning(tune, f);

    auto* opf = app.add_subcommand("opf", "DC-OPF and the relaxed OPF; writes solutions and gap.csv");
    opf->add_option("--case", f.cases, "Case name or path")->required()->expected(1);
    opf->add_option("--method", f.programs, "Programs to solve (default all)")
        ->check(CLI::IsMember({"all", "dc", "ddcr"}));
    opf->add_option("--model", f.model, "models.json from `fit` (default: fit GB now)");
    add_sampling(opf, f);
    add_learning(opf, f);

    auto* rep = app.add_subcommand("reproduce", "Full run over case5/case57/case118 with default settings");
    rep->add_option("--case", f.cases, "Restrict to these cases");
    f.seeds = 1;
    rep->add_option("--seeds", f.seeds, "Seeds for the comparison (default 5)")->check(CLI::PositiveNumber);
    rep->add_option("--grid-t", f.grid_t, "T grid");
    rep->add_option("--grid-bt", f.grid_bt, "BT grid");
    add_sampling(rep, f);
    add_learning(rep, f);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*gen) return cmd_generate(f, args, out);
        if (*fit) return cmd_fit(f, args, out, err);
        if (*cmp) return cmd_compare(f, args, out, err);
        if (*tune) return cmd_tune(f, args, out);
        if (*opf) return cmd_opf(f, args, out, err);
        if (*rep) {
            if (rep->count("--seeds") == 0) f.seeds = 5;
            return cmd_reproduce(f, args, out, err);
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kExitSolve;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}

}  // namespace elpf
