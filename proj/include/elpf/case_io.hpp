#pragma once

#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "elpf/util.hpp"

namespace elpf {

enum class BusKind { Slack, PV, PQ };

struct Bus {
    int id = 0;  // external (case file) number
    BusKind kind = BusKind::PQ;
    double p_load = 0.0;  // p.u.
    double q_load = 0.0;
    double g_shunt = 0.0;  // p.u. at 1.0 p.u. voltage
    double b_shunt = 0.0;
    double v_setpoint = 1.0;
    double v_max = 1.1;
    double v_min = 0.9;  // stored, never used by the relaxed OPF

    bool operator==(const Bus&) const = default;
};

struct Branch {
    int from = 0;  // internal 0-based bus index
    int to = 0;
    std::complex<double> impedance{0.0, 0.0};
    double total_shunt_susceptance = 0.0;
    double tap_ratio = 1.0;
    double phase_shift = 0.0;  // radians
    double s_max = 0.0;        // p.u., 0 = unlimited

    bool rated() const { return s_max > 0.0; }
    bool operator==(const Branch&) const = default;
};

/// Polynomial cost in $/hr of output in MW.
struct GenCost {
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;

    double at_mw(double p_mw) const { return c0 + p_mw * (c1 + p_mw * c2); }
    bool operator==(const GenCost&) const = default;
};

struct Generator {
    int bus = 0;  // internal index
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    double p_setpoint = 0.0;
    double v_setpoint = 1.0;
    GenCost cost;

    bool operator==(const Generator&) const = default;
};

struct NetworkCase {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;

    std::size_t n_bus() const { return buses.size(); }
    std::size_t n_branch() const { return branches.size(); }
    std::size_t slack_index() const;
    /// Internal index of the bus with external number `id`; throws if absent.
    std::size_t bus_index(int id) const;
    /// Generators grouped by bus (internal indices into `generators`).
    std::vector<std::vector<std::size_t>> generators_by_bus() const;

    bool operator==(const NetworkCase&) const = default;
};

class CaseError : public InputError {
  public:
    enum class Kind { Syntax, Semantic };
    CaseError(Kind kind, const std::string& what) : InputError(what), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

/// Parses MATPOWER case text or the JSON mirror (detected by a leading '{').
/// Out-of-service branches and generators are dropped. Throws CaseError.
NetworkCase parse_case(std::string_view text, const std::string& name = "");
NetworkCase parse_matpower(std::string_view text, const std::string& name = "");
NetworkCase parse_case_json(std::string_view text);
std::string case_to_json(const NetworkCase& c);

/// A bundled name ("case5", "case57", "case118") or a file path.
NetworkCase load_case(const std::string& name_or_path);
std::string resolve_case_path(const std::string& name_or_path);

/// Throws CaseError(Semantic) on the first violated invariant.
void validate_case(const NetworkCase& c);

/// Two-port pi-model admittances of one branch, MATPOWER convention
/// (tap on the from side, complex ratio t = tap * exp(j shift)).
struct BranchAdmittance {
    std::complex<double> yff, yft, ytf, ytt;
};
BranchAdmittance branch_admittance(const Branch& br);

Eigen::MatrixXcd build_admittance(const NetworkCase& c);

}  // namespace elpf
