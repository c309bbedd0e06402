#include "elpf/case_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <queue>

#include "json.hpp"

namespace elpf {

namespace {

using Row = std::vector<double>;

[[noreturn]] void syntax_error(const std::string& msg) {
    throw CaseError(CaseError::Kind::Syntax, "syntax error: " + msg);
}

[[noreturn]] void semantic_error(const std::string& msg) {
    throw CaseError(CaseError::Kind::Semantic, "semantic error: " + msg);
}

std::string strip_comments(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_comment = false;
    bool in_string = false;
    for (char c : text) {
        if (c == '\n') {
            in_comment = false;
            in_string = false;
            out.push_back(c);
            continue;
        }
        if (in_comment) continue;
        if (c == '\'') in_string = !in_string;
        if (c == '%' && !in_string) {
            in_comment = true;
            continue;
        }
        out.push_back(c);
    }
    return out;
}

std::size_t line_of(const std::string& text, std::size_t pos) {
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

// Locates "mpc.<field> =" and returns the position just after '='.
std::size_t find_field(const std::string& text, const std::string& field) {
    const std::string key = "mpc." + field;
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        std::size_t p = pos + key.size();
        while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
        if (p < text.size() && text[p] == '=') return p + 1;
        pos = p;
    }
    return std::string::npos;
}

double parse_number(std::string_view tok, const std::string& text, std::size_t pos) {
    double v = 0.0;
    if (tok == "Inf" || tok == "inf") return std::numeric_limits<double>::infinity();
    if (tok == "-Inf" || tok == "-inf") return -std::numeric_limits<double>::infinity();
    std::string_view t = tok;
    if (!t.empty() && t.front() == '+') t.remove_prefix(1);
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
        syntax_error("malformed number '" + std::string(tok) + "' near line " +
                     std::to_string(line_of(text, pos)));
    return v;
}

std::vector<Row> parse_matrix(const std::string& text, const std::string& field, bool required) {
    const std::size_t eq = find_field(text, field);
    if (eq == std::string::npos) {
        if (required) syntax_error("missing section mpc." + field);
        return {};
    }
    const std::size_t open = text.find_first_not_of(" \t\r\n", eq);
    if (open == std::string::npos || text[open] != '[')
        syntax_error("mpc." + field + " is not a matrix");
    const std::size_t close = text.find(']', open);
    if (close == std::string::npos) syntax_error("unterminated matrix mpc." + field);

    std::vector<Row> rows;
    Row current;
    std::size_t i = open + 1;
    auto flush = [&] {
        if (!current.empty()) rows.push_back(std::move(current));
        current.clear();
    };
    while (i < close) {
        const char c = text[i];
        if (c == ';' || c == '\n') {
            flush();
            ++i;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == ',') {
            ++i;
        } else {
            std::size_t j = i;
            while (j < close && !std::strchr(" \t\r\n;,", text[j])) ++j;
            current.push_back(parse_number(std::string_view(text).substr(i, j - i), text, i));
            i = j;
        }
    }
    flush();
    for (const auto& r : rows) {
        if (r.size() != rows.front().size())
            syntax_error("malformed matrix row in mpc." + field + " (ragged column count)");
    }
    return rows;
}

double parse_scalar(const std::string& text, const std::string& field) {
    const std::size_t eq = find_field(text, field);
    if (eq == std::string::npos) syntax_error("missing mpc." + field);
    const std::size_t semi = text.find_first_of(";\n", eq);
    std::string tok = text.substr(eq, semi - eq);
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
              tok.end());
    return parse_number(tok, text, eq);
}

void require_cols(const std::vector<Row>& rows, std::size_t n, const std::string& field) {
    if (!rows.empty() && rows.front().size() < n)
        syntax_error("mpc." + field + " needs at least " + std::to_string(n) + " columns");
}

const char* kind_name(BusKind k) {
    switch (k) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "pv";
        case BusKind::PQ: return "pq";
    }
    return "pq";
}

BusKind kind_from_name(const std::string& s) {
    if (s == "slack") return BusKind::Slack;
    if (s == "pv") return BusKind::PV;
    if (s == "pq") return BusKind::PQ;
    semantic_error("unknown bus kind '" + s + "'");
}

void check_connected(const NetworkCase& c) {
    const std::size_t n = c.n_bus();
    if (n == 0) return;
    std::vector<std::vector<int>> adj(n);
    for (const auto& br : c.branches) {
        adj[static_cast<std::size_t>(br.from)].push_back(br.to);
        adj[static_cast<std::size_t>(br.to)].push_back(br.from);
    }
    std::vector<char> seen(n, 0);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!q.empty()) {
        auto u = q.front();
        q.pop();
        for (int v : adj[u]) {
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                ++count;
                q.push(static_cast<std::size_t>(v));
            }
        }
    }
    if (count != n) semantic_error("network is not connected");
}

}  // namespace

std::size_t NetworkCase::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].kind == BusKind::Slack) return i;
    throw CaseError(CaseError::Kind::Semantic, "semantic error: no slack bus");
}

std::size_t NetworkCase::bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return i;
    throw CaseError(CaseError::Kind::Semantic, "semantic error: unknown bus " + std::to_string(id));
}

std::vector<std::vector<std::size_t>> NetworkCase::generators_by_bus() const {
    std::vector<std::vector<std::size_t>> out(buses.size());
    for (std::size_t g = 0; g < generators.size(); ++g)
        out[static_cast<std::size_t>(generators[g].bus)].push_back(g);
    return out;
}

void validate_case(const NetworkCase& c) {
    if (!(c.base_mva > 0.0)) semantic_error("baseMVA must be positive");
    if (c.buses.empty()) semantic_error("case has no buses");
    std::size_t slacks = 0;
    for (const auto& b : c.buses) slacks += b.kind == BusKind::Slack;
    if (slacks == 0) semantic_error("no slack bus");
    if (slacks > 1) semantic_error("more than one slack bus");

    const int n = static_cast<int>(c.n_bus());
    for (std::size_t l = 0; l < c.branches.size(); ++l) {
        const auto& br = c.branches[l];
        if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n)
            semantic_error("dangling branch endpoint on branch " + std::to_string(l + 1));
        if (br.from == br.to) semantic_error("branch " + std::to_string(l + 1) + " is a self-loop");
        if (!(std::abs(br.impedance) > 0.0))
            semantic_error("branch " + std::to_string(l + 1) + " has zero series impedance");
        if (!(br.tap_ratio > 0.0)) semantic_error("branch " + std::to_string(l + 1) + " has nonpositive tap");
    }
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
        const auto& gen = c.generators[g];
        const std::string tag = "generator " + std::to_string(g + 1);
        if (gen.bus < 0 || gen.bus >= n) semantic_error(tag + " references a missing bus");
        if (gen.p_min > gen.p_max) semantic_error(tag + " has p_min > p_max");
        if (gen.q_min > gen.q_max) semantic_error(tag + " has q_min > q_max");
        if (gen.cost.c2 < 0.0) semantic_error(tag + " has negative c2");
    }
    for (const auto& b : c.buses) {
        if (b.v_max <= 0.0) semantic_error("bus " + std::to_string(b.id) + " has nonpositive v_max");
        if (b.kind != BusKind::PQ && (b.v_setpoint < b.v_min || b.v_setpoint > b.v_max))
            semantic_error("bus " + std::to_string(b.id) + " setpoint outside [v_min, v_max]");
    }
    check_connected(c);
}

NetworkCase parse_matpower(std::string_view raw, const std::string& name) {
    const std::string text = strip_comments(raw);
    NetworkCase c;
    c.name = name;
    c.base_mva = parse_scalar(text, "baseMVA");
    const double base = c.base_mva;
    if (!(base > 0.0)) semantic_error("baseMVA must be positive");

    const auto bus_rows = parse_matrix(text, "bus", true);
    const auto gen_rows = parse_matrix(text, "gen", true);
    const auto branch_rows = parse_matrix(text, "branch", true);
    const auto cost_rows = parse_matrix(text, "gencost", true);
    require_cols(bus_rows, 13, "bus");
    require_cols(gen_rows, 10, "gen");
    require_cols(branch_rows, 11, "branch");
    require_cols(cost_rows, 4, "gencost");
    if (cost_rows.size() < gen_rows.size()) syntax_error("mpc.gencost has fewer rows than mpc.gen");

    std::map<int, std::size_t> index;
    for (const auto& r : bus_rows) {
        Bus b;
        b.id = static_cast<int>(r[0]);
        const int type = static_cast<int>(r[1]);
        switch (type) {
            case 1: b.kind = BusKind::PQ; break;
            case 2: b.kind = BusKind::PV; break;
            case 3: b.kind = BusKind::Slack; break;
            default: semantic_error("unsupported bus type " + std::to_string(type) + " at bus " + std::to_string(b.id));
        }
        b.p_load = r[2] / base;
        b.q_load = r[3] / base;
        b.g_shunt = r[4] / base;
        b.b_shunt = r[5] / base;
        b.v_setpoint = r[7];
        b.v_max = r[11];
        b.v_min = r[12];
        if (!index.emplace(b.id, c.buses.size()).second)
            semantic_error("duplicate bus number " + std::to_string(b.id));
        c.buses.push_back(b);
    }
    auto lookup = [&](double id, const std::string& what) -> int {
        auto it = index.find(static_cast<int>(id));
        if (it == index.end())
            semantic_error("dangling " + what + " endpoint (bus " + std::to_string(static_cast<int>(id)) + ")");
        return static_cast<int>(it->second);
    };

    std::vector<char> has_gen(c.buses.size(), 0);
    for (std::size_t g = 0; g < gen_rows.size(); ++g) {
        const auto& r = gen_rows[g];
        if (r[7] <= 0.0) continue;  // out of service
        const auto& cr = cost_rows[g];
        if (static_cast<int>(cr[0]) != 2)
            semantic_error("generator " + std::to_string(g + 1) + ": only polynomial costs are supported");
        const int ncoef = static_cast<int>(cr[3]);
        if (ncoef < 1 || ncoef > 3)
            semantic_error("generator " + std::to_string(g + 1) + ": cost degree above 2 is unsupported");
        if (cr.size() < static_cast<std::size_t>(4 + ncoef)) syntax_error("truncated gencost row");
        Generator gen;
        gen.bus = lookup(r[0], "generator");
        gen.p_setpoint = r[1] / base;
        gen.q_max = r[3] / base;
        gen.q_min = r[4] / base;
        gen.v_setpoint = r[5];
        gen.p_max = r[8] / base;
        gen.p_min = r[9] / base;
        // highest order first: c(n-1) ... c0
        double coef[3] = {0.0, 0.0, 0.0};
        for (int k = 0; k < ncoef; ++k) coef[ncoef - 1 - k] = cr[static_cast<std::size_t>(4 + k)];
        gen.cost = {coef[0], coef[1], coef[2]};
        auto& bus = c.buses[static_cast<std::size_t>(gen.bus)];
        if (!has_gen[static_cast<std::size_t>(gen.bus)] && bus.kind != BusKind::PQ)
            bus.v_setpoint = gen.v_setpoint;
        has_gen[static_cast<std::size_t>(gen.bus)] = 1;
        c.generators.push_back(gen);
    }
    // A PV bus with no in-service unit behaves as PQ.
    for (std::size_t i = 0; i < c.buses.size(); ++i)
        if (c.buses[i].kind == BusKind::PV && !has_gen[i]) c.buses[i].kind = BusKind::PQ;

    for (const auto& r : branch_rows) {
        if (r[10] <= 0.0) continue;
        Branch br;
        br.from = lookup(r[0], "branch");
        br.to = lookup(r[1], "branch");
        br.impedance = {r[2], r[3]};
        br.total_shunt_susceptance = r[4];
        br.s_max = r[5] / base;
        br.tap_ratio = r[8] == 0.0 ? 1.0 : r[8];
        br.phase_shift = r[9] * std::numbers::pi / 180.0;
        c.branches.push_back(br);
    }
    validate_case(c);
    return c;
}

NetworkCase parse_case_json(std::string_view text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        syntax_error(std::string("invalid JSON: ") + e.what());
    }
    NetworkCase c;
    try {
        c.name = j.value("name", "");
        c.base_mva = j.at("base_mva").get<double>();
        std::map<int, int> index;
        for (const auto& jb : j.at("buses")) {
            Bus b;
            b.id = jb.at("id").get<int>();
            b.kind = kind_from_name(jb.at("kind").get<std::string>());
            b.p_load = jb.at("p_load").get<double>();
            b.q_load = jb.at("q_load").get<double>();
            b.g_shunt = jb.value("g_shunt", 0.0);
            b.b_shunt = jb.value("b_shunt", 0.0);
            b.v_setpoint = jb.at("v_setpoint").get<double>();
            b.v_max = jb.at("v_max").get<double>();
            b.v_min = jb.at("v_min").get<double>();
            if (!index.emplace(b.id, static_cast<int>(c.buses.size())).second)
                semantic_error("duplicate bus number " + std::to_string(b.id));
            c.buses.push_back(b);
        }
        auto lookup = [&](int id, const std::string& what) {
            auto it = index.find(id);
            if (it == index.end()) semantic_error("dangling " + what + " endpoint (bus " + std::to_string(id) + ")");
            return it->second;
        };
        for (const auto& jb : j.at("branches")) {
            Branch br;
            br.from = lookup(jb.at("from").get<int>(), "branch");
            br.to = lookup(jb.at("to").get<int>(), "branch");
            br.impedance = {jb.at("r").get<double>(), jb.at("x").get<double>()};
            br.total_shunt_susceptance = jb.value("b", 0.0);
            br.tap_ratio = jb.value("tap_ratio", 1.0);
            br.phase_shift = jb.value("phase_shift", 0.0);
            br.s_max = jb.value("s_max", 0.0);
            c.branches.push_back(br);
        }
        for (const auto& jg : j.at("generators")) {
            Generator g;
            g.bus = lookup(jg.at("bus").get<int>(), "generator");
            g.p_min = jg.at("p_min").get<double>();
            g.p_max = jg.at("p_max").get<double>();
            g.q_min = jg.at("q_min").get<double>();
            g.q_max = jg.at("q_max").get<double>();
            g.p_setpoint = jg.value("p_setpoint", 0.0);
            g.v_setpoint = jg.value("v_setpoint", 1.0);
            const auto& cost = jg.at("cost");
            g.cost = {cost.at(0).get<double>(), cost.at(1).get<double>(), cost.at(2).get<double>()};
            c.generators.push_back(g);
        }
    } catch (const json::exception& e) {
        syntax_error(std::string("case JSON schema: ") + e.what());
    }
    validate_case(c);
    return c;
}

std::string case_to_json(const NetworkCase& c) {
    using nlohmann::json;
    json j;
    j["name"] = c.name;
    j["base_mva"] = c.base_mva;
    json buses = json::array();
    for (const auto& b : c.buses) {
        buses.push_back({{"id", b.id},
                         {"kind", kind_name(b.kind)},
                         {"p_load", b.p_load},
                         {"q_load", b.q_load},
                         {"g_shunt", b.g_shunt},
                         {"b_shunt", b.b_shunt},
                         {"v_setpoint", b.v_setpoint},
                         {"v_max", b.v_max},
                         {"v_min", b.v_min}});
    }
    json branches = json::array();
    for (const auto& br : c.branches) {
        branches.push_back({{"from", c.buses[static_cast<std::size_t>(br.from)].id},
                            {"to", c.buses[static_cast<std::size_t>(br.to)].id},
                            {"r", br.impedance.real()},
                            {"x", br.impedance.imag()},
                            {"b", br.total_shunt_susceptance},
                            {"tap_ratio", br.tap_ratio},
                            {"phase_shift", br.phase_shift},
                            {"s_max", br.s_max}});
    }
    json gens = json::array();
    for (const auto& g : c.generators) {
        gens.push_back({{"bus", c.buses[static_cast<std::size_t>(g.bus)].id},
                        {"p_min", g.p_min},
                        {"p_max", g.p_max},
                        {"q_min", g.q_min},
                        {"q_max", g.q_max},
                        {"p_setpoint", g.p_setpoint},
                        {"v_setpoint", g.v_setpoint},
                        {"cost", {g.cost.c0, g.cost.c1, g.cost.c2}}});
    }
    j["buses"] = std::move(buses);
    j["branches"] = std::move(branches);
    j["generators"] = std::move(gens);
    return j.dump(2);
}

NetworkCase parse_case(std::string_view text, const std::string& name) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && text[first] == '{') {
        NetworkCase c = parse_case_json(text);
        if (c.name.empty()) c.name = name;
        return c;
    }
    return parse_matpower(text, name);
}

std::string resolve_case_path(const std::string& name_or_path) {
    namespace fs = std::filesystem;
    if (fs::exists(name_or_path)) return name_or_path;
    for (const char* ext : {".m", ".json"}) {
        fs::path p = fs::path(ELPF_DATA_DIR) / (name_or_path + ext);
        if (fs::exists(p)) return p.string();
    }
    throw InputError("case not found: " + name_or_path);
}

NetworkCase load_case(const std::string& name_or_path) {
    const std::string path = resolve_case_path(name_or_path);
    return parse_case(read_file(path), std::filesystem::path(path).stem().string());
}

BranchAdmittance branch_admittance(const Branch& br) {
    using cd = std::complex<double>;
    const cd ys = 1.0 / br.impedance;
    const cd bc(0.0, br.total_shunt_susceptance / 2.0);
    const cd t = std::polar(br.tap_ratio, br.phase_shift);
    BranchAdmittance y;
    y.ytt = ys + bc;
    y.yff = y.ytt / (br.tap_ratio * br.tap_ratio);
    y.yft = -ys / std::conj(t);
    y.ytf = -ys / t;
    return y;
}

Eigen::MatrixXcd build_admittance(const NetworkCase& c) {
    const auto n = static_cast<Eigen::Index>(c.n_bus());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& br : c.branches) {
        const auto a = branch_admittance(br);
        y(br.from, br.from) += a.yff;
        y(br.from, br.to) += a.yft;
        y(br.to, br.from) += a.ytf;
        y(br.to, br.to) += a.ytt;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = c.buses[static_cast<std::size_t>(i)];
        y(i, i) += std::complex<double>(b.g_shunt, b.b_shunt);
    }
    return y;
}

}  // namespace elpf
