#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elpf/datagen.hpp"
#include "elpf/ensemble.hpp"
#include "elpf/linmodel.hpp"
#include "elpf/opf.hpp"

namespace elpf {

enum class Method { PR, GB, Bagging };
enum class Family { BusP, BusQ, BranchP, BranchQ };
enum class Split { Test, Train };

std::string to_string(Method m);
std::string to_string(Family f);
std::string to_string(Split s);
Method method_from_string(const std::string& s);
Family family_from_string(const std::string& s);
Split split_from_string(const std::string& s);

inline constexpr Method kMethods[] = {Method::PR, Method::GB, Method::Bagging};
inline constexpr Family kFamilies[] = {Family::BusP, Family::BusQ, Family::BranchP, Family::BranchQ};
inline constexpr Split kSplits[] = {Split::Test, Split::Train};

/// Per-output RMSE averaged over outputs. Throws InputError on shape mismatch
/// or an empty sample.
double rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

struct RmseEntry {
    Method method = Method::PR;
    Family family = Family::BusP;
    Split split = Split::Test;
    double rmse = 0.0;  // p.u.
    std::optional<double> median;  // over seeds, when several were run
    bool operator==(const RmseEntry&) const = default;
};

struct RmseReport {
    std::string case_name;
    std::size_t n_seeds = 1;
    std::vector<RmseEntry> entries;

    /// Throws std::out_of_range when the cell is absent.
    const RmseEntry& at(Method m, Family f, Split s) const;
    double value(Method m, Family f, Split s) const { return at(m, f, s).rmse; }
    /// Median when present, otherwise the single-run value.
    double median(Method m, Family f, Split s) const;
    bool operator==(const RmseReport&) const = default;
};

struct CompareConfig {
    SamplerConfig sampler;
    BoostConfig boost;
    BagConfig bag;
    FeatureMap::Kind branch_features = FeatureMap::Kind::BranchEndpoints;
    bool include_branches = true;
};

struct JensenRecord {
    std::string target;  // "bus_P", "bus_Q" or "branch <l>"
    JensenCheck test;
};

struct CompareResult {
    RmseReport report;
    SurrogateModels gb_models;  // collapsed GB fits, ready for the relaxed OPF
    std::vector<JensenRecord> jensen;
    std::vector<std::string> warnings;
    DatasetMeta data;
};

/// Generates a dataset, splits it, fits PR / GB / Bagging on the training half
/// and reports test and training RMSE for every label family.
CompareResult compare_methods(const NetworkCase& c, const CompareConfig& cfg);

/// Runs compare_methods for seeds base, base+1, ... and attaches per-cell
/// medians. The returned report's plain values are those of the base seed.
/// Seeds run concurrently across `jobs` workers.
RmseReport compare_over_seeds(const NetworkCase& c, const CompareConfig& cfg, std::size_t n_seeds, int jobs,
                              std::vector<RmseReport>* per_seed = nullptr, CompareResult* base_run = nullptr);

/// CSV: case,method,family,split,rmse,rmse_x1e5 (+ median_rmse,median_rmse_x1e5,seeds).
std::string report_to_csv(const std::vector<RmseReport>& reports);
std::vector<RmseReport> reports_from_csv(const std::string& text);

struct SweepPoint {
    std::size_t value = 0;
    Family family = Family::BusP;
    Split split = Split::Test;
    double rmse = 0.0;
    bool operator==(const SweepPoint&) const = default;
};

struct MemberScatter {
    std::size_t member = 0;
    Family family = Family::BusP;
    Split split = Split::Test;
    double rmse = 0.0;
};

struct SweepCurve {
    enum class Param { T, BT };
    std::string case_name;
    Param param = Param::T;
    std::vector<std::size_t> grid;
    std::vector<SweepPoint> points;
    std::vector<MemberScatter> scatter;  // bagging only: each member on its own

    double at(std::size_t value, Family f, Split s) const;
};

std::string to_string(SweepCurve::Param p);

/// Bus P and Q curves over the number of boosting stages. One run with
/// max(grid) stages is snapshotted at every grid point; T = 0 is the constant
/// initializer.
SweepCurve sweep_boosting(const NetworkCase& c, const SamplerConfig& sampler, const BoostConfig& boost,
                          const std::vector<std::size_t>& grid);

/// Bus P and Q curves over the number of bootstraps; grid point BT averages the
/// first BT members of one run. Grid values must be >= 1.
SweepCurve sweep_bagging(const NetworkCase& c, const SamplerConfig& sampler, const BagConfig& bag,
                         const std::vector<std::size_t>& grid);

/// CSV: case,param,value,family,split,rmse
std::string sweep_to_csv(const std::vector<SweepCurve>& curves);
/// CSV: case,member,family,split,rmse
std::string scatter_to_csv(const std::vector<SweepCurve>& curves);
std::vector<SweepPoint> sweep_points_from_csv(const std::string& text);

struct ChartSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
    bool markers_only = false;
};

/// Self-contained SVG line chart; log10 y axis when requested (values <= 0
/// are dropped in that case).
std::string svg_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<ChartSeries>& series, bool log_y);

std::string sweep_svg(const SweepCurve& curve);
/// Test RMSE per family for each method, log scale.
std::string report_svg(const RmseReport& report);

}  // namespace elpf
