#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elpf/acpf.hpp"
#include "elpf/case_io.hpp"

namespace elpf {

struct SamplerConfig {
    std::size_t n_samples = 0;  // 0 = default size for the case
    double load_scale_min = 0.6;
    double load_scale_max = 1.1;
    std::uint64_t seed = 1;
    bool per_load_independent = true;
    double split_fraction = 0.5;
    int jobs = 1;
    AcOptions ac;

    /// Throws InputError on invalid ranges.
    void validate() const;
};

/// Sample sizes used per bundled case (175 / 250 / 400); 2.4 x buses otherwise.
std::size_t default_sample_size(const NetworkCase& c);
/// ceil(2.4 x bus count): the smallest recommended sample size.
std::size_t minimum_sample_size(const NetworkCase& c);

struct DatasetMeta {
    std::string case_name;
    std::uint64_t seed = 0;
    std::size_t failed_samples = 0;
    std::vector<std::string> warnings;
};

/// One row per sample. Features are [e_1, f_1, ..., e_n, f_n].
struct Dataset {
    Eigen::MatrixXd features;
    Eigen::MatrixXd bus_p;
    Eigen::MatrixXd bus_q;
    Eigen::MatrixXd branch_p;
    Eigen::MatrixXd branch_q;
    DatasetMeta meta;

    std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
    Dataset select(const std::vector<std::size_t>& rows) const;
    bool operator==(const Dataset& o) const;
};

/// Monte Carlo sampler: every load scaled by u ~ U[min, max] (p and q share
/// the factor), AC power flow solved, voltages and flows recorded.
/// Non-convergent draws are redrawn and counted; more than 20% failures abort.
Dataset generate(const NetworkCase& c, const SamplerConfig& cfg);

/// Load factors drawn for sample `row`, attempt `attempt` (one per bus).
Eigen::VectorXd draw_load_factors(const NetworkCase& c, const SamplerConfig& cfg, std::size_t row,
                                  std::size_t attempt);

/// Seeded shuffle then partition; the train side gets ceil(fraction * M).
std::pair<Dataset, Dataset> split(const Dataset& ds, const SamplerConfig& cfg);

// Persistence: features.csv, bus_p.csv, bus_q.csv, branch_p.csv, branch_q.csv,
// dataset.bin and meta.json under `dir`. Returns the written paths.
std::vector<std::string> save_dataset_csv(const Dataset& ds, const std::string& dir);
Dataset load_dataset_csv(const std::string& dir);
std::string dataset_to_binary(const Dataset& ds);
Dataset dataset_from_binary(std::string_view bytes);
std::string dataset_meta_json(const Dataset& ds);

}  // namespace elpf
