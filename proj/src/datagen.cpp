#include "elpf/datagen.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace elpf {

namespace {

constexpr std::size_t kMaxAttemptsPerRow = 50;
constexpr char kBinaryMagic[8] = {'E', 'L', 'P', 'F', 'D', 'S', '0', '1'};

std::vector<std::string> column_names(const std::string& prefix, Eigen::Index n) {
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i + 1));
    return out;
}

std::vector<std::string> feature_names(Eigen::Index nbus) {
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < nbus; ++i) {
        out.push_back("e" + std::to_string(i + 1));
        out.push_back("f" + std::to_string(i + 1));
    }
    return out;
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_u64(std::string_view bytes, std::size_t& pos) {
    if (pos + 8 > bytes.size()) throw InputError("truncated dataset binary");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
    pos += 8;
    return v;
}

void put_matrix(std::string& out, const Eigen::MatrixXd& m) {
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::uint64_t bits;
            const double v = m(i, j);
            std::memcpy(&bits, &v, sizeof bits);
            put_u64(out, bits);
        }
}

Eigen::MatrixXd get_matrix(std::string_view bytes, std::size_t& pos) {
    const auto rows = static_cast<Eigen::Index>(get_u64(bytes, pos));
    const auto cols = static_cast<Eigen::Index>(get_u64(bytes, pos));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            const std::uint64_t bits = get_u64(bytes, pos);
            double v;
            std::memcpy(&v, &bits, sizeof v);
            m(i, j) = v;
        }
    return m;
}

}  // namespace

void SamplerConfig::validate() const {
    if (!(load_scale_min > 0.0) || !(load_scale_min <= load_scale_max))
        throw InputError("sampler: need 0 < load_scale_min <= load_scale_max");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw InputError("sampler: split_fraction must lie in (0, 1)");
}

std::size_t minimum_sample_size(const NetworkCase& c) {
    return static_cast<std::size_t>(std::ceil(2.4 * static_cast<double>(c.n_bus()) - 1e-9));
}

std::size_t default_sample_size(const NetworkCase& c) {
    switch (c.n_bus()) {
        case 5: return 175;
        case 57: return 250;
        case 118: return 400;
        default: return minimum_sample_size(c);
    }
}

Dataset Dataset::select(const std::vector<std::size_t>& rows) const {
    auto pick = [&](const Eigen::MatrixXd& m) {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
        return out;
    };
    return {pick(features), pick(bus_p), pick(bus_q), pick(branch_p), pick(branch_q), meta};
}

bool Dataset::operator==(const Dataset& o) const {
    auto same = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
    };
    return same(features, o.features) && same(bus_p, o.bus_p) && same(bus_q, o.bus_q) &&
           same(branch_p, o.branch_p) && same(branch_q, o.branch_q) && meta.case_name == o.meta.case_name &&
           meta.seed == o.meta.seed && meta.failed_samples == o.meta.failed_samples;
}

Eigen::VectorXd draw_load_factors(const NetworkCase& c, const SamplerConfig& cfg, std::size_t row,
                                  std::size_t attempt) {
    Rng rng(cfg.seed, row, attempt);
    const auto n = static_cast<Eigen::Index>(c.n_bus());
    Eigen::VectorXd u(n);
    if (cfg.per_load_independent) {
        for (Eigen::Index i = 0; i < n; ++i) u[i] = rng.uniform(cfg.load_scale_min, cfg.load_scale_max);
    } else {
        u.setConstant(rng.uniform(cfg.load_scale_min, cfg.load_scale_max));
    }
    return u;
}

Dataset generate(const NetworkCase& c, const SamplerConfig& cfg) {
    cfg.validate();
    const std::size_t m = cfg.n_samples ? cfg.n_samples : default_sample_size(c);
    const auto n = static_cast<Eigen::Index>(c.n_bus());
    const auto nl = static_cast<Eigen::Index>(c.n_branch());
    const Eigen::MatrixXcd ybus = build_admittance(c);

    Dataset ds;
    ds.meta.case_name = c.name;
    ds.meta.seed = cfg.seed;
    if (m < minimum_sample_size(c)) {
        ds.meta.warnings.push_back("sample size " + std::to_string(m) + " is below 2.4 x bus count (" +
                                   std::to_string(minimum_sample_size(c)) + ")");
    }
    const auto rows = static_cast<Eigen::Index>(m);
    ds.features.resize(rows, 2 * n);
    ds.bus_p.resize(rows, n);
    ds.bus_q.resize(rows, n);
    ds.branch_p.resize(rows, nl);
    ds.branch_q.resize(rows, nl);

    std::vector<std::size_t> failures(m, 0);
    parallel_for(m, cfg.jobs, [&](std::size_t row) {
        NetworkCase sample = c;
        for (std::size_t attempt = 0;; ++attempt) {
            if (attempt >= kMaxAttemptsPerRow)
                throw ConvergenceError("datagen: sample " + std::to_string(row) + " failed to converge " +
                                       std::to_string(attempt) + " times");
            const Eigen::VectorXd u = draw_load_factors(c, cfg, row, attempt);
            for (Eigen::Index i = 0; i < n; ++i) {
                sample.buses[static_cast<std::size_t>(i)].p_load = c.buses[static_cast<std::size_t>(i)].p_load * u[i];
                sample.buses[static_cast<std::size_t>(i)].q_load = c.buses[static_cast<std::size_t>(i)].q_load * u[i];
            }
            try {
                const AcResult res = solve_ac(sample, ybus, cfg.ac);
                const FlowRecord fr = compute_flows(sample, ybus, res.voltage);
                const auto r = static_cast<Eigen::Index>(row);
                ds.features.row(r) = res.voltage.interleaved().transpose();
                ds.bus_p.row(r) = fr.p_inj.transpose();
                ds.bus_q.row(r) = fr.q_inj.transpose();
                ds.branch_p.row(r) = fr.p_flow.transpose();
                ds.branch_q.row(r) = fr.q_flow.transpose();
                return;
            } catch (const AcDivergenceError&) {
                ++failures[row];
            }
        }
    });
    ds.meta.failed_samples = std::accumulate(failures.begin(), failures.end(), std::size_t{0});
    const double draws = static_cast<double>(m + ds.meta.failed_samples);
    if (static_cast<double>(ds.meta.failed_samples) > 0.2 * draws)
        throw ConvergenceError("datagen: " + std::to_string(ds.meta.failed_samples) + " of " +
                               std::to_string(static_cast<std::size_t>(draws)) +
                               " draws failed to converge (> 20%); check case and sampler ranges");
    return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SamplerConfig& cfg) {
    if (!(cfg.split_fraction > 0.0 && cfg.split_fraction < 1.0)) throw InputError("split: fraction must lie in (0, 1)");
    const std::size_t m = ds.rows();
    if (m < 2) throw InputError("split: need at least 2 rows");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed, 0x5417u, 0);
    for (std::size_t i = m - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    std::size_t n_train = static_cast<std::size_t>(std::ceil(cfg.split_fraction * static_cast<double>(m) - 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, m - 1);
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<long>(n_train));
    std::vector<std::size_t> test(order.begin() + static_cast<long>(n_train), order.end());
    return {ds.select(train), ds.select(test)};
}

std::string dataset_meta_json(const Dataset& ds) {
    nlohmann::json j{{"case", ds.meta.case_name},
                     {"seed", ds.meta.seed},
                     {"failed_samples", ds.meta.failed_samples},
                     {"rows", ds.rows()},
                     {"buses", ds.bus_p.cols()},
                     {"branches", ds.branch_p.cols()},
                     {"warnings", ds.meta.warnings}};
    return j.dump(2);
}

std::string dataset_to_binary(const Dataset& ds) {
    std::string out(kBinaryMagic, sizeof kBinaryMagic);
    for (const auto* m : {&ds.features, &ds.bus_p, &ds.bus_q, &ds.branch_p, &ds.branch_q}) put_matrix(out, *m);
    return out;
}

Dataset dataset_from_binary(std::string_view bytes) {
    if (bytes.size() < sizeof kBinaryMagic || std::memcmp(bytes.data(), kBinaryMagic, sizeof kBinaryMagic) != 0)
        throw InputError("not an elpf dataset binary");
    std::size_t pos = sizeof kBinaryMagic;
    Dataset ds;
    for (auto* m : {&ds.features, &ds.bus_p, &ds.bus_q, &ds.branch_p, &ds.branch_q}) *m = get_matrix(bytes, pos);
    return ds;
}

std::vector<std::string> save_dataset_csv(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const Eigen::Index n = ds.bus_p.cols();
    const Eigen::Index nl = ds.branch_p.cols();
    std::vector<std::pair<std::string, std::string>> files = {
        {"features.csv", matrix_to_csv(ds.features, feature_names(n))},
        {"bus_p.csv", matrix_to_csv(ds.bus_p, column_names("p", n))},
        {"bus_q.csv", matrix_to_csv(ds.bus_q, column_names("q", n))},
        {"branch_p.csv", matrix_to_csv(ds.branch_p, column_names("pij", nl))},
        {"branch_q.csv", matrix_to_csv(ds.branch_q, column_names("qij", nl))},
        {"dataset.bin", dataset_to_binary(ds)},
        {"meta.json", dataset_meta_json(ds)},
    };
    std::vector<std::string> paths;
    for (const auto& [name, body] : files) {
        const std::string p = (fs::path(dir) / name).string();
        write_file(p, body);
        paths.push_back(p);
    }
    return paths;
}

Dataset load_dataset_csv(const std::string& dir) {
    namespace fs = std::filesystem;
    auto load = [&](const char* name) { return matrix_from_csv(read_file((fs::path(dir) / name).string())); };
    Dataset ds{load("features.csv"), load("bus_p.csv"), load("bus_q.csv"), load("branch_p.csv"), load("branch_q.csv"), {}};
    const fs::path meta = fs::path(dir) / "meta.json";
    if (fs::exists(meta)) {
        const auto j = nlohmann::json::parse(read_file(meta.string()));
        ds.meta.case_name = j.value("case", "");
        ds.meta.seed = j.value("seed", std::uint64_t{0});
        ds.meta.failed_samples = j.value("failed_samples", std::size_t{0});
    }
    return ds;
}

}  // namespace elpf
