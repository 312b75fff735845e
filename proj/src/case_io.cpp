// Case file reading and writing. The tabular format mirrors the MATPOWER
// mpc tables (same column order); a literal MATPOWER .m case file parses too.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gridppo/case.hpp"
#include "gridppo/checksum.hpp"

namespace gridppo {
namespace {

using Row = std::vector<double>;

struct RawTables {
    std::optional<double> baseMVA;
    std::map<std::string, std::vector<std::pair<std::size_t, Row>>> tables;
};

bool is_table(std::string_view name) {
    return name == "bus" || name == "gen" || name == "branch" || name == "gencost";
}

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

double parse_number(std::string_view tok, std::size_t line) {
    double v = 0.0;
    std::string_view t = tok;
    if (!t.empty() && t.front() == '+') t.remove_prefix(1);
    // MATPOWER writes Inf/-Inf for open limits.
    if (t == "Inf" || t == "inf") return HUGE_VAL;
    if (t == "-Inf" || t == "-inf") return -HUGE_VAL;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size())
        throw CaseParseError(line, "invalid number '" + std::string(tok) + "'");
    return v;
}

Row parse_row(std::string_view s, std::size_t line) {
    Row row;
    std::size_t i = 0;
    auto sep = [](char ch) { return ch == ' ' || ch == '\t' || ch == ',' || ch == ';' || ch == '\r'; };
    while (i < s.size()) {
        while (i < s.size() && sep(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !sep(s[j])) ++j;
        if (j > i) row.push_back(parse_number(s.substr(i, j - i), line));
        i = j;
    }
    return row;
}

RawTables read_tables(std::string_view text) {
    RawTables raw;
    std::string current;  // active table, "baseMVA", "skip" or empty
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;

        if (auto c = line.find_first_of("%#"); c != std::string_view::npos) line = line.substr(0, c);
        line = trim(line);
        if (line.empty()) continue;

        if (current == "skip") {
            if (line.find(']') != std::string_view::npos) current.clear();
            continue;
        }
        if (line.starts_with("function")) continue;

        bool closes = false;
        if (line.starts_with("mpc.")) {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) throw CaseParseError(lineno, "expected '=' after field name");
            const std::string name(trim(line.substr(4, eq - 4)));
            std::string_view rest = trim(line.substr(eq + 1));
            if (name == "version") continue;
            if (name == "baseMVA") {
                while (!rest.empty() && rest.back() == ';') rest.remove_suffix(1);
                raw.baseMVA = parse_number(trim(rest), lineno);
                continue;
            }
            if (!is_table(name)) {
                // Auxiliary MATPOWER fields (areas, bus names, ...) are ignored.
                if (rest.find('[') != std::string_view::npos || rest.find('{') != std::string_view::npos)
                    current = rest.find_first_of("]}") == std::string_view::npos ? "skip" : "";
                continue;
            }
            current = name;
            raw.tables[current];
            if (auto b = rest.find('['); b != std::string_view::npos) rest = rest.substr(b + 1);
            if (auto e = rest.find(']'); e != std::string_view::npos) {
                rest = rest.substr(0, e);
                closes = true;
            }
            line = trim(rest);
            if (line.empty()) {
                if (closes) current.clear();
                continue;
            }
        } else if (std::isalpha(static_cast<unsigned char>(line.front()))) {
            std::string_view word = line.substr(0, line.find_first_of(" \t"));
            std::string_view rest = trim(line.substr(word.size()));
            if (word == "baseMVA") {
                if (rest.empty()) {
                    current = "baseMVA";
                } else {
                    raw.baseMVA = parse_number(rest, lineno);
                    current.clear();
                }
                continue;
            }
            if (!is_table(word)) throw CaseParseError(lineno, "unknown section '" + std::string(word) + "'");
            if (!rest.empty()) throw CaseParseError(lineno, "unexpected text after section header");
            current = std::string(word);
            raw.tables[current];
            continue;
        } else if (line.front() == ']') {
            current.clear();
            continue;
        }

        if (auto e = line.find(']'); e != std::string_view::npos) {
            line = line.substr(0, e);
            closes = true;
        }
        if (current.empty()) throw CaseParseError(lineno, "data row outside any section");
        Row row = parse_row(line, lineno);
        if (current == "baseMVA") {
            if (row.size() != 1) throw CaseParseError(lineno, "baseMVA takes a single value");
            raw.baseMVA = row.front();
            current.clear();
        } else if (!row.empty()) {
            raw.tables[current].emplace_back(lineno, std::move(row));
        }
        if (closes) current.clear();
    }
    return raw;
}

int as_int(double v, std::size_t line, const char* what) {
    if (v != std::floor(v)) throw CaseParseError(line, std::string(what) + " must be an integer");
    return static_cast<int>(v);
}

void need_columns(const Row& r, std::size_t n, std::size_t line, const char* table) {
    if (r.size() < n)
        throw CaseParseError(line, std::string(table) + " row needs at least " + std::to_string(n) + " columns, got " +
                                       std::to_string(r.size()));
}

Case build_case(const RawTables& raw) {
    if (!raw.baseMVA) throw CaseParseError(0, "missing required section 'baseMVA'");
    for (const char* t : {"bus", "gen", "branch"}) {
        if (!raw.tables.contains(t)) throw CaseParseError(0, std::string("missing required section '") + t + "'");
    }
    Case c;
    c.baseMVA = *raw.baseMVA;

    for (const auto& [line, r] : raw.tables.at("bus")) {
        need_columns(r, 13, line, "bus");
        Bus b;
        b.id = as_int(r[0], line, "bus id");
        const int kind = as_int(r[1], line, "bus type");
        if (kind < 1 || kind > 3)
            throw CaseParseError(line, "unsupported bus type " + std::to_string(kind));
        b.kind = static_cast<BusKind>(kind);
        b.Pd = r[2];
        b.Qd = r[3];
        b.Gs = r[4];
        b.Bs = r[5];
        b.area = as_int(r[6], line, "area");
        b.Vm = r[7];
        b.Va = r[8];
        b.base_kV = r[9];
        b.zone = as_int(r[10], line, "zone");
        b.Vmax = r[11];
        b.Vmin = r[12];
        c.buses.push_back(b);
    }

    auto check_bus = [&c](int id, std::size_t line, const char* what) {
        if (!c.find_bus(id)) throw CaseParseError(line, std::string(what) + " references undefined bus " + std::to_string(id));
    };

    std::vector<std::size_t> gen_lines;
    for (const auto& [line, r] : raw.tables.at("gen")) {
        need_columns(r, 10, line, "gen");
        Generator g;
        g.bus = as_int(r[0], line, "generator bus");
        check_bus(g.bus, line, "generator");
        g.Pg = r[1];
        g.Qg = r[2];
        g.Qmax = r[3];
        g.Qmin = r[4];
        g.Vg = r[5];
        g.mBase = r[6];
        if (r[7] <= 0.0) throw CaseParseError(line, "out-of-service generators are not supported");
        g.Pmax = r[8];
        g.Pmin = r[9];
        c.generators.push_back(g);
        gen_lines.push_back(line);
    }

    for (const auto& [line, r] : raw.tables.at("branch")) {
        need_columns(r, 11, line, "branch");
        Branch br;
        br.from = as_int(r[0], line, "from bus");
        br.to = as_int(r[1], line, "to bus");
        check_bus(br.from, line, "branch");
        check_bus(br.to, line, "branch");
        br.r = r[2];
        br.x = r[3];
        br.b_charging = r[4];
        br.S_max = r[5];
        br.rate_b = r[6];
        br.rate_c = r[7];
        br.tap = r[8];
        br.shift = r[9];
        br.in_service = r[10] > 0.0;
        if (r.size() >= 13) {
            br.angle_min = r[11];
            br.angle_max = r[12];
        }
        c.branches.push_back(br);
    }

    if (auto it = raw.tables.find("gencost"); it != raw.tables.end()) {
        const auto& rows = it->second;
        if (rows.size() != c.generators.size()) {
            const std::size_t line = rows.empty() ? 0 : rows.front().first;
            throw CaseParseError(line, "gencost has " + std::to_string(rows.size()) + " rows for " +
                                           std::to_string(c.generators.size()) + " generators");
        }
        for (std::size_t g = 0; g < rows.size(); ++g) {
            const auto& [line, r] = rows[g];
            need_columns(r, 4, line, "gencost");
            const int model = as_int(r[0], line, "cost model");
            if (model == 1) throw CaseParseError(line, "piecewise-linear costs are not supported");
            if (model != 2) throw CaseParseError(line, "unknown cost model " + std::to_string(model));
            const int n = as_int(r[3], line, "coefficient count");
            if (n < 0 || n > 3) throw CaseParseError(line, "only polynomial costs of degree <= 2 are supported");
            need_columns(r, 4 + static_cast<std::size_t>(n), line, "gencost");
            PolyCost cost;
            cost.startup = r[1];
            cost.shutdown = r[2];
            std::array<double, 3> coeff{0.0, 0.0, 0.0};  // c2, c1, c0
            for (int k = 0; k < n; ++k) coeff[static_cast<std::size_t>(3 - n + k)] = r[4 + static_cast<std::size_t>(k)];
            cost.c2 = coeff[0];
            cost.c1 = coeff[1];
            cost.c0 = coeff[2];
            c.generators[g].cost = cost;
        }
    }
    return c;
}

RawTables read_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw CaseParseError(0, std::string("invalid JSON: ") + e.what());
    }
    RawTables raw;
    if (j.contains("baseMVA")) raw.baseMVA = j.at("baseMVA").get<double>();
    for (const char* t : {"bus", "gen", "branch", "gencost"}) {
        if (!j.contains(t)) continue;
        auto& rows = raw.tables[t];
        std::size_t k = 0;
        for (const auto& r : j.at(t)) rows.emplace_back(++k, r.get<Row>());
    }
    return raw;
}

void validate_or_throw(const Case& c) {
    const auto v = validate_case(c);
    if (v.empty()) return;
    std::string msg = "invalid case:";
    for (const auto& s : v) msg += "\n  " + s;
    throw CaseError(msg);
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return std::string(buf.data(), ptr);
}

std::vector<Row> bus_rows(const Case& c) {
    std::vector<Row> rows;
    for (const auto& b : c.buses)
        rows.push_back({double(b.id), double(static_cast<int>(b.kind)), b.Pd, b.Qd, b.Gs, b.Bs, double(b.area), b.Vm,
                        b.Va, b.base_kV, double(b.zone), b.Vmax, b.Vmin});
    return rows;
}

std::vector<Row> gen_rows(const Case& c) {
    std::vector<Row> rows;
    for (const auto& g : c.generators)
        rows.push_back({double(g.bus), g.Pg, g.Qg, g.Qmax, g.Qmin, g.Vg, g.mBase, 1.0, g.Pmax, g.Pmin});
    return rows;
}

std::vector<Row> branch_rows(const Case& c) {
    std::vector<Row> rows;
    for (const auto& br : c.branches)
        rows.push_back({double(br.from), double(br.to), br.r, br.x, br.b_charging, br.S_max, br.rate_b, br.rate_c,
                        br.tap, br.shift, br.in_service ? 1.0 : 0.0, br.angle_min, br.angle_max});
    return rows;
}

std::vector<Row> gencost_rows(const Case& c) {
    std::vector<Row> rows;
    for (const auto& g : c.generators)
        rows.push_back({2.0, g.cost.startup, g.cost.shutdown, 3.0, g.cost.c2, g.cost.c1, g.cost.c0});
    return rows;
}

}  // namespace

Case parse_case(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    const bool json = first != std::string_view::npos && text[first] == '{';
    Case c = build_case(json ? read_json(text) : read_tables(text));
    validate_or_throw(c);
    return c;
}

Case load_case(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CaseError("cannot open case file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

std::string serialize_case(const Case& c) {
    std::ostringstream os;
    auto table = [&os](const char* name, const std::vector<Row>& rows) {
        os << name << '\n';
        for (const auto& r : rows) {
            for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "\t" : "") << fmt(r[k]);
            os << '\n';
        }
    };
    os << "% gridppo case, MATPOWER column order\n";
    os << "baseMVA " << fmt(c.baseMVA) << '\n';
    table("bus", bus_rows(c));
    table("gen", gen_rows(c));
    table("branch", branch_rows(c));
    table("gencost", gencost_rows(c));
    return os.str();
}

std::string serialize_case_json(const Case& c) {
    nlohmann::json j;
    j["baseMVA"] = c.baseMVA;
    j["bus"] = bus_rows(c);
    j["gen"] = gen_rows(c);
    j["branch"] = branch_rows(c);
    j["gencost"] = gencost_rows(c);
    return j.dump(1);
}

std::string case_fingerprint(const Case& c) {
    return crc32_hex(serialize_case(c));
}

}  // namespace gridppo
