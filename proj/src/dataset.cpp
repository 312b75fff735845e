#include "gridppo/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gridppo/checksum.hpp"
#include "gridppo/power_flow.hpp"

namespace gridppo {
namespace {

using nlohmann::json;

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit draw so the permutation does not depend on
    // the standard library's shuffle implementation.
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

Dataset with_scenarios(const Dataset& meta, std::vector<Scenario> scenarios) {
    Dataset d;
    d.version = meta.version;
    d.case_fingerprint = meta.case_fingerprint;
    d.params = meta.params;
    d.calibration = meta.calibration;
    d.n_generated = meta.n_generated;
    d.n_infeasible = meta.n_infeasible;
    d.n_failed = meta.n_failed;
    d.scenarios = std::move(scenarios);
    return d;
}

// Replays labeled setpoints through the power flow and records the realized cost.
bool replay_clean(const Case& c, Scenario& s, double tol, PowerFlowSolver& pf) {
    Case k = apply_scenario(c, s);
    for (std::size_t g = 0; g < k.gen_count(); ++g) {
        k.generators[g].Pg = s.Pg_opt(static_cast<Eigen::Index>(g));
        k.generators[g].Vg = s.Vg_opt(static_cast<Eigen::Index>(g));
    }
    const auto sol = pf.solve(k);
    if (!sol.converged || !check_violations(k, sol, tol).empty()) return false;
    s.cost_replay = gen_cost(k, sol.Pg);
    return true;
}

// ---- serialization ----

json header_json(const Dataset& d) {
    return json{{"format", "gridppo-dataset"},
                {"version", d.version},
                {"case_fingerprint", d.case_fingerprint},
                {"generation",
                 {{"n", d.params.n},
                  {"load_lo", d.params.load_lo},
                  {"load_hi", d.params.load_hi},
                  {"seed", d.params.seed},
                  {"per_bus", d.params.per_bus}}},
                {"calibration",
                 {{"defined", d.calibration.defined},
                  {"k", d.calibration.k},
                  {"b", d.calibration.b},
                  {"c_min", d.calibration.c_min},
                  {"c_max", d.calibration.c_max}}},
                {"n_generated", d.n_generated},
                {"n_infeasible", d.n_infeasible},
                {"n_failed", d.n_failed},
                {"count", d.scenarios.size()}};
}

void header_from_json(const json& h, Dataset& d) {
    if (h.value("format", "") != "gridppo-dataset") throw DatasetError("not a gridppo dataset");
    d.version = h.at("version").get<int>();
    if (d.version != kDatasetVersion)
        throw DatasetError("dataset version " + std::to_string(d.version) + " is not supported (expected " +
                           std::to_string(kDatasetVersion) + ")");
    d.case_fingerprint = h.at("case_fingerprint").get<std::string>();
    const auto& g = h.at("generation");
    d.params.n = g.at("n").get<std::size_t>();
    d.params.load_lo = g.at("load_lo").get<double>();
    d.params.load_hi = g.at("load_hi").get<double>();
    d.params.seed = g.at("seed").get<std::uint64_t>();
    d.params.per_bus = g.at("per_bus").get<bool>();
    const auto& c = h.at("calibration");
    d.calibration.defined = c.at("defined").get<bool>();
    d.calibration.k = c.at("k").get<double>();
    d.calibration.b = c.at("b").get<double>();
    d.calibration.c_min = c.at("c_min").get<double>();
    d.calibration.c_max = c.at("c_max").get<double>();
    d.n_generated = h.at("n_generated").get<std::size_t>();
    d.n_infeasible = h.at("n_infeasible").get<std::size_t>();
    d.n_failed = h.at("n_failed").get<std::size_t>();
}

json scenario_json(const Scenario& s) {
    json j{{"id", s.id}, {"Pd", to_json(s.Pd)}, {"Qd", to_json(s.Qd)}, {"Pg0", to_json(s.Pg0)},
           {"Vg0", to_json(s.Vg0)}, {"feasible", s.feasible}, {"labeled", s.labeled}};
    if (s.labeled) {
        j["Pg_opt"] = to_json(s.Pg_opt);
        j["Vg_opt"] = to_json(s.Vg_opt);
        j["cost_opt"] = s.cost_opt;
        j["cost_replay"] = s.cost_replay;
        j["z"] = s.z;
    }
    return j;
}

Scenario scenario_from_json(const json& j) {
    Scenario s;
    s.id = j.at("id").get<std::uint64_t>();
    s.Pd = vec_from(j.at("Pd"));
    s.Qd = vec_from(j.at("Qd"));
    s.Pg0 = vec_from(j.at("Pg0"));
    s.Vg0 = vec_from(j.at("Vg0"));
    s.feasible = j.at("feasible").get<bool>();
    s.labeled = j.at("labeled").get<bool>();
    if (s.labeled) {
        s.Pg_opt = vec_from(j.at("Pg_opt"));
        s.Vg_opt = vec_from(j.at("Vg_opt"));
        s.cost_opt = j.at("cost_opt").get<double>();
        s.cost_replay = j.at("cost_replay").get<double>();
        s.z = j.at("z").get<double>();
    }
    return s;
}

void save_jsonl(const Dataset& d, const std::string& path) {
    std::string body;
    for (const auto& s : d.scenarios) {
        body += scenario_json(s).dump();
        body += '\n';
    }
    json h = header_json(d);
    h["checksum"] = crc32_hex(body);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetError("cannot write " + path);
    out << h.dump() << '\n' << body;
    if (!out) throw DatasetError("write failed for " + path);
}

Dataset load_jsonl(std::istream& in) {
    std::string header_line;
    if (!std::getline(in, header_line)) throw DatasetError("dataset is empty");
    json h;
    try {
        h = json::parse(header_line);
    } catch (const json::exception& e) {
        throw DatasetError(std::string("corrupt dataset header: ") + e.what());
    }
    Dataset d;
    header_from_json(h, d);
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (crc32_hex(body) != h.at("checksum").get<std::string>())
        throw DatasetError("corrupt dataset: checksum mismatch (file truncated or modified)");
    std::istringstream lines(body);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        d.scenarios.push_back(scenario_from_json(json::parse(line)));
    }
    if (d.scenarios.size() != h.at("count").get<std::size_t>()) throw DatasetError("corrupt dataset: record count mismatch");
    return d;
}

// Binary layout: magic, u64 header length, header JSON, then the body as
// columns (ids, flags, Pd, Qd, Pg0, Vg0, Pg_opt, Vg_opt, cost_opt, cost_replay, z),
// each N rows of native little-endian values.
constexpr char kMagic[8] = {'G', 'P', 'D', 'S', 'B', 'I', 'N', '1'};

template <typename T>
void put(std::string& buf, const T& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw DatasetError("corrupt dataset: unexpected end of binary body");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

void save_bin(const Dataset& d, const std::string& path) {
    const std::size_t nb = d.scenarios.empty() ? 0 : static_cast<std::size_t>(d.scenarios.front().Pd.size());
    const std::size_t ng = d.scenarios.empty() ? 0 : static_cast<std::size_t>(d.scenarios.front().Pg0.size());
    std::string body;
    for (const auto& s : d.scenarios) put(body, s.id);
    for (const auto& s : d.scenarios) put(body, static_cast<std::uint8_t>((s.feasible ? 1 : 0) | (s.labeled ? 2 : 0)));
    auto column = [&](auto member, std::size_t width) {
        for (const auto& s : d.scenarios) {
            const Vec& v = s.*member;
            for (std::size_t k = 0; k < width; ++k)
                put(body, v.size() ? v(static_cast<Eigen::Index>(k)) : std::nan(""));
        }
    };
    column(&Scenario::Pd, nb);
    column(&Scenario::Qd, nb);
    column(&Scenario::Pg0, ng);
    column(&Scenario::Vg0, ng);
    column(&Scenario::Pg_opt, ng);
    column(&Scenario::Vg_opt, ng);
    for (const auto& s : d.scenarios) put(body, s.cost_opt);
    for (const auto& s : d.scenarios) put(body, s.cost_replay);
    for (const auto& s : d.scenarios) put(body, s.z);

    json h = header_json(d);
    h["checksum"] = crc32_hex(body);
    h["buses"] = nb;
    h["generators"] = ng;
    const std::string hs = h.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetError("cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = hs.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out << hs << body;
    if (!out) throw DatasetError("write failed for " + path);
}

Dataset load_bin(std::istream& in) {
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (all.size() < sizeof kMagic + 8 || std::memcmp(all.data(), kMagic, sizeof kMagic) != 0)
        throw DatasetError("corrupt dataset: bad binary magic");
    std::size_t pos = sizeof kMagic;
    const auto len = get<std::uint64_t>(all, pos);
    if (pos + len > all.size()) throw DatasetError("corrupt dataset: truncated header");
    json h;
    try {
        h = json::parse(all.substr(pos, len));
    } catch (const json::exception& e) {
        throw DatasetError(std::string("corrupt dataset header: ") + e.what());
    }
    Dataset d;
    header_from_json(h, d);
    const std::string body = all.substr(pos + len);
    if (crc32_hex(body) != h.at("checksum").get<std::string>())
        throw DatasetError("corrupt dataset: checksum mismatch (file truncated or modified)");
    const auto n = h.at("count").get<std::size_t>();
    const auto nb = static_cast<Eigen::Index>(h.at("buses").get<std::size_t>());
    const auto ng = static_cast<Eigen::Index>(h.at("generators").get<std::size_t>());
    d.scenarios.resize(n);
    pos = 0;
    for (auto& s : d.scenarios) s.id = get<std::uint64_t>(body, pos);
    for (auto& s : d.scenarios) {
        const auto f = get<std::uint8_t>(body, pos);
        s.feasible = f & 1;
        s.labeled = f & 2;
    }
    auto column = [&](auto member, Eigen::Index width) {
        for (auto& s : d.scenarios) {
            Vec& v = s.*member;
            v.resize(width);
            for (Eigen::Index k = 0; k < width; ++k) v(k) = get<double>(body, pos);
        }
    };
    column(&Scenario::Pd, nb);
    column(&Scenario::Qd, nb);
    column(&Scenario::Pg0, ng);
    column(&Scenario::Vg0, ng);
    column(&Scenario::Pg_opt, ng);
    column(&Scenario::Vg_opt, ng);
    for (auto& s : d.scenarios) s.cost_opt = get<double>(body, pos);
    for (auto& s : d.scenarios) s.cost_replay = get<double>(body, pos);
    for (auto& s : d.scenarios) s.z = get<double>(body, pos);
    for (auto& s : d.scenarios) {
        if (!s.labeled) {
            s.Pg_opt.resize(0);
            s.Vg_opt.resize(0);
        }
    }
    if (pos != body.size()) throw DatasetError("corrupt dataset: trailing bytes in binary body");
    return d;
}

}  // namespace

std::vector<Scenario> generate_scenarios(const Case& c, const GenerationParams& p) {
    if (!(p.load_lo > 0.0) || !(p.load_lo <= p.load_hi))
        throw std::invalid_argument("load range must satisfy 0 < lo <= hi");
    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> mult(p.load_lo, p.load_hi), unit(0.0, 1.0);
    const Scenario base = scenario_from_case(c);
    const auto nb = base.Pd.size();
    const auto ng = base.Pg0.size();
    std::vector<Scenario> out;
    out.reserve(p.n);
    for (std::size_t k = 0; k < p.n; ++k) {
        Scenario s = base;
        s.id = k;
        // Degenerate ranges reproduce the base loads exactly.
        const bool fixed = p.load_lo == p.load_hi;
        const double system = p.per_bus ? 0.0 : mult(rng);
        for (Eigen::Index i = 0; i < nb; ++i) {
            const double m = fixed ? p.load_lo : (p.per_bus ? mult(rng) : system);
            s.Pd(i) = base.Pd(i) * m;
            s.Qd(i) = base.Qd(i) * m;
        }
        for (Eigen::Index g = 0; g < ng; ++g) {
            const auto& gen = c.generators[static_cast<std::size_t>(g)];
            const auto& bus = c.buses[c.bus_index(gen.bus)];
            s.Pg0(g) = gen.Pmin + unit(rng) * (gen.Pmax - gen.Pmin);
            s.Vg0(g) = bus.Vmin + unit(rng) * (bus.Vmax - bus.Vmin);
        }
        out.push_back(std::move(s));
    }
    return out;
}

LabelOutcome label_scenario(const Case& c, Scenario& s, const LabelOptions& opt) {
    const Case k = apply_scenario(c, s);
    const auto sol = solve_opf(k, opt.opf);
    s.labeled = false;
    s.feasible = false;
    if (sol.status == OpfStatus::Infeasible) return LabelOutcome::Infeasible;
    if (sol.status != OpfStatus::Optimal) return LabelOutcome::Failed;
    s.Pg_opt = sol.Pg_opt;
    s.Vg_opt = sol.Vg_opt;
    s.cost_opt = sol.objective;
    PowerFlowSolver pf(k);
    if (!replay_clean(c, s, opt.replay_tol, pf)) return LabelOutcome::Failed;
    s.labeled = true;
    s.feasible = true;
    return LabelOutcome::Labeled;
}

namespace {

// Runs `work(i)` over all indices on a small thread pool, stopping early when
// `stop` becomes true. Outcomes are stored by index so results stay ordered.
template <typename Work>
std::vector<std::optional<LabelOutcome>> run_pool(std::size_t n, unsigned threads, const LabelOptions& opt,
                                                  Work work) {
    std::vector<std::optional<LabelOutcome>> outcomes(n);
    std::atomic<std::size_t> next{0}, done{0}, failed{0};
    std::atomic<bool> stop{false};
    auto worker = [&] {
        while (!stop) {
            const std::size_t i = next++;
            if (i >= n) break;
            const LabelOutcome o = work(i);
            outcomes[i] = o;
            const std::size_t d = ++done;
            const std::size_t f = o == LabelOutcome::Failed ? ++failed : failed.load();
            if (d >= opt.min_checked && static_cast<double>(f) > opt.max_failure_rate * static_cast<double>(d))
                stop = true;
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return outcomes;
}

Dataset assemble(const Case& c, const std::vector<Scenario>& labeled_in,
                 const std::vector<std::optional<LabelOutcome>>& outcomes, const GenerationParams& params,
                 const LabelOptions& opt) {
    Dataset d;
    d.case_fingerprint = case_fingerprint(c);
    d.params = params;
    d.n_generated = labeled_in.size();
    std::size_t processed = 0;
    for (std::size_t i = 0; i < labeled_in.size(); ++i) {
        if (!outcomes[i]) continue;
        ++processed;
        switch (*outcomes[i]) {
            case LabelOutcome::Labeled: d.scenarios.push_back(labeled_in[i]); break;
            case LabelOutcome::Infeasible: ++d.n_infeasible; break;
            case LabelOutcome::Failed: ++d.n_failed; break;
        }
    }
    d.calibration = calibrate(d.scenarios);
    apply_calibration(d.scenarios, d.calibration);
    const bool too_many = processed >= opt.min_checked &&
                          static_cast<double>(d.n_failed) > opt.max_failure_rate * static_cast<double>(processed);
    if (too_many || processed < labeled_in.size()) {
        std::ostringstream os;
        os << "oracle failure rate too high: " << d.n_failed << " of " << processed
           << " processed scenarios failed (limit " << opt.max_failure_rate << ")";
        throw LabelingError(os.str(), std::move(d));
    }
    return d;
}

}  // namespace

Dataset label_scenarios(const Case& c, const std::vector<Scenario>& scenarios, const GenerationParams& params,
                        const LabelOptions& opt) {
    for (const auto& s : scenarios) check_dimensions(c, s);
    std::vector<Scenario> work = scenarios;
    const auto outcomes = run_pool(work.size(), opt.threads, opt, [&](std::size_t i) {
        return label_scenario(c, work[i], opt);
    });
    return assemble(c, work, outcomes, params, opt);
}

std::vector<ExternalLabel> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot read labels " + path);
    std::vector<ExternalLabel> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        try {
            const json j = json::parse(line);
            ExternalLabel l;
            l.id = j.at("id").get<std::uint64_t>();
            l.feasible = j.at("feasible").get<bool>();
            if (l.feasible) {
                l.Pg_opt = vec_from(j.at("Pg_opt"));
                l.Vg_opt = vec_from(j.at("Vg_opt"));
                l.cost_opt = j.at("cost_opt").get<double>();
            }
            out.push_back(std::move(l));
        } catch (const json::exception& e) {
            throw DatasetError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_labels(const std::vector<ExternalLabel>& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write " + path);
    for (const auto& l : labels) {
        json j{{"id", l.id}, {"feasible", l.feasible}};
        if (l.feasible) {
            j["Pg_opt"] = to_json(l.Pg_opt);
            j["Vg_opt"] = to_json(l.Vg_opt);
            j["cost_opt"] = l.cost_opt;
        }
        out << j.dump() << '\n';
    }
}

Dataset ingest_labels(const Case& c, const std::vector<Scenario>& scenarios, const std::vector<ExternalLabel>& labels,
                      const GenerationParams& params, const LabelOptions& opt) {
    std::map<std::uint64_t, const ExternalLabel*> by_id;
    for (const auto& l : labels) by_id[l.id] = &l;
    std::vector<Scenario> work = scenarios;
    const auto outcomes = run_pool(work.size(), opt.threads, opt, [&](std::size_t i) {
        Scenario& s = work[i];
        check_dimensions(c, s);
        s.labeled = s.feasible = false;
        const auto it = by_id.find(s.id);
        if (it == by_id.end()) return LabelOutcome::Failed;
        const ExternalLabel& l = *it->second;
        if (!l.feasible) return LabelOutcome::Infeasible;
        if (l.Pg_opt.size() != s.Pg0.size() || l.Vg_opt.size() != s.Vg0.size()) return LabelOutcome::Failed;
        s.Pg_opt = l.Pg_opt;
        s.Vg_opt = l.Vg_opt;
        s.cost_opt = l.cost_opt;
        PowerFlowSolver pf(c);
        if (!replay_clean(c, s, opt.replay_tol, pf)) return LabelOutcome::Failed;
        s.labeled = s.feasible = true;
        return LabelOutcome::Labeled;
    });
    return assemble(c, work, outcomes, params, opt);
}

std::pair<Dataset, Dataset> split(const Dataset& ds, std::size_t n_train, std::uint64_t seed) {
    n_train = std::min(n_train, ds.scenarios.size());
    const auto idx = shuffled_indices(ds.scenarios.size(), seed);
    std::vector<Scenario> train, test;
    for (std::size_t k = 0; k < idx.size(); ++k) (k < n_train ? train : test).push_back(ds.scenarios[idx[k]]);
    const Calibration cal = calibrate(train);
    apply_calibration(train, cal);
    apply_calibration(test, cal);
    Dataset a = with_scenarios(ds, std::move(train));
    Dataset b = with_scenarios(ds, std::move(test));
    a.calibration = b.calibration = cal;
    return {std::move(a), std::move(b)};
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw std::invalid_argument("train fraction must be in [0, 1]");
    const auto n = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ds.scenarios.size())));
    return split(ds, n, seed);
}

Dataset take_fraction(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must be in (0, 1]");
    const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ds.scenarios.size())));
    const auto idx = shuffled_indices(ds.scenarios.size(), seed);
    std::vector<Scenario> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back(ds.scenarios[idx[k]]);
    return with_scenarios(ds, std::move(out));
}

void save_dataset(const Dataset& ds, const std::string& path) {
    if (ends_with(path, ".bin")) save_bin(ds, path);
    else save_jsonl(ds, path);
}

Dataset load_dataset(const std::string& path, const std::optional<std::string>& expected_fingerprint) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot read " + path);
    Dataset d;
    try {
        d = ends_with(path, ".bin") ? load_bin(in) : load_jsonl(in);
    } catch (const json::exception& e) {
        throw DatasetError("corrupt dataset " + path + ": " + e.what());
    }
    if (expected_fingerprint && *expected_fingerprint != d.case_fingerprint)
        throw DatasetError("case fingerprint mismatch: dataset " + path + " was built for " + d.case_fingerprint +
                           ", current case is " + *expected_fingerprint);
    return d;
}

}  // namespace gridppo
