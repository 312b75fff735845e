#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "fixtures.hpp"
#include "gridppo/dataset.hpp"
#include "gridppo/environment.hpp"

using namespace gridppo;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / ("gridppo_test_dataset_" + name)).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << bytes;
}

const Dataset& small_labeled() {
    static const Dataset ds = [] {
        const Case c = fixtures::case14_mod();
        GenerationParams p;
        p.n = 30;
        p.seed = 5;
        return label_scenarios(c, generate_scenarios(c, p), p);
    }();
    return ds;
}

void check_same(const Dataset& a, const Dataset& b) {
    CHECK(a.version == b.version);
    CHECK(a.case_fingerprint == b.case_fingerprint);
    CHECK(a.params.n == b.params.n);
    CHECK(a.params.seed == b.params.seed);
    CHECK(a.params.load_lo == b.params.load_lo);
    CHECK(a.params.load_hi == b.params.load_hi);
    CHECK(a.params.per_bus == b.params.per_bus);
    CHECK(a.calibration.defined == b.calibration.defined);
    CHECK(a.calibration.k == b.calibration.k);
    CHECK(a.calibration.b == b.calibration.b);
    CHECK(a.n_generated == b.n_generated);
    CHECK(a.n_infeasible == b.n_infeasible);
    CHECK(a.n_failed == b.n_failed);
    REQUIRE(a.scenarios.size() == b.scenarios.size());
    for (std::size_t i = 0; i < a.scenarios.size(); ++i) {
        const auto &x = a.scenarios[i], &y = b.scenarios[i];
        CHECK(x.id == y.id);
        CHECK(x.Pd == y.Pd);
        CHECK(x.Qd == y.Qd);
        CHECK(x.Pg0 == y.Pg0);
        CHECK(x.Vg0 == y.Vg0);
        CHECK(x.feasible == y.feasible);
        CHECK(x.labeled == y.labeled);
        CHECK(x.Pg_opt == y.Pg_opt);
        CHECK(x.Vg_opt == y.Vg_opt);
        CHECK(x.cost_opt == y.cost_opt);
        CHECK(x.cost_replay == y.cost_replay);
        CHECK(x.z == y.z);
    }
}

}  // namespace

TEST_CASE("degenerate load range keeps base loads") {
    const Case c = fixtures::case14();
    GenerationParams p;
    p.n = 10;
    p.load_lo = p.load_hi = 1.0;
    const Scenario base = scenario_from_case(c);
    for (const auto& s : generate_scenarios(c, p)) {
        CHECK(s.Pd == base.Pd);
        CHECK(s.Qd == base.Qd);
    }
}

TEST_CASE("generated scenarios respect the boxes and the seed") {
    const Case c = fixtures::case14();
    GenerationParams p;
    p.n = 500;
    p.seed = 42;
    const auto a = generate_scenarios(c, p), b = generate_scenarios(c, p);
    REQUIRE(a.size() == 500);
    const Scenario base = scenario_from_case(c);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].id == k);
        CHECK(a[k].Pd == b[k].Pd);
        CHECK(a[k].Vg0 == b[k].Vg0);
        for (Eigen::Index i = 0; i < base.Pd.size(); ++i) {
            if (base.Pd(i) == 0.0) continue;
            const double m = a[k].Pd(i) / base.Pd(i);
            CHECK(m >= 0.6);
            CHECK(m <= 1.4);
            if (base.Qd(i) != 0.0) CHECK(a[k].Qd(i) / base.Qd(i) == doctest::Approx(m));
        }
        for (std::size_t g = 0; g < c.gen_count(); ++g) {
            const auto& gen = c.generators[g];
            const auto& bus = c.buses[c.bus_index(gen.bus)];
            const auto gi = static_cast<Eigen::Index>(g);
            CHECK(a[k].Pg0(gi) >= gen.Pmin);
            CHECK(a[k].Pg0(gi) <= gen.Pmax);
            CHECK(a[k].Vg0(gi) >= bus.Vmin);
            CHECK(a[k].Vg0(gi) <= bus.Vmax);
        }
    }
    p.seed = 43;
    CHECK(generate_scenarios(c, p)[0].Pd != a[0].Pd);
    p.load_lo = 0.0;
    CHECK_THROWS_AS(generate_scenarios(c, p), std::invalid_argument);
}

TEST_CASE("per-bus multipliers are uncorrelated") {
    const Case c = fixtures::case14();
    GenerationParams p;
    p.n = 10000;
    p.seed = 7;
    const auto sc = generate_scenarios(c, p);
    const Scenario base = scenario_from_case(c);
    std::vector<Eigen::Index> loaded;
    for (Eigen::Index i = 0; i < base.Pd.size(); ++i)
        if (base.Pd(i) != 0.0) loaded.push_back(i);
    Mat m(static_cast<Eigen::Index>(sc.size()), static_cast<Eigen::Index>(loaded.size()));
    for (std::size_t k = 0; k < sc.size(); ++k)
        for (std::size_t j = 0; j < loaded.size(); ++j)
            m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = sc[k].Pd(loaded[j]) / base.Pd(loaded[j]);
    const Mat centered = m.rowwise() - m.colwise().mean();
    const Mat cov = centered.transpose() * centered / static_cast<double>(m.rows() - 1);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
        for (Eigen::Index j = i + 1; j < cov.cols(); ++j)
            worst = std::max(worst, std::abs(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j))));
    CHECK(worst <= 0.05);
}

TEST_CASE("system-wide multiplier moves every bus together") {
    const Case c = fixtures::case14();
    GenerationParams p;
    p.n = 5;
    p.per_bus = false;
    const Scenario base = scenario_from_case(c);
    for (const auto& s : generate_scenarios(c, p)) {
        const double m = s.Pd(1) / base.Pd(1);
        for (Eigen::Index i = 0; i < base.Pd.size(); ++i)
            if (base.Pd(i) != 0.0) CHECK(s.Pd(i) / base.Pd(i) == doctest::Approx(m));
    }
}

TEST_CASE("nominal scenario labels with the reference cost") {
    const Case c = fixtures::case14();
    Scenario s = scenario_from_case(c);
    REQUIRE(label_scenario(c, s, {}) == LabelOutcome::Labeled);
    const double ref = fixtures::reference()["opf_nominal"]["objective"].get<double>();
    CHECK(std::abs(s.cost_opt - ref) / ref <= 1e-3);
    CHECK(std::abs(s.cost_replay - s.cost_opt) / s.cost_opt <= 1e-6);
}

TEST_CASE("infeasible scenario is dropped") {
    const Case tight = override_branch_limit(fixtures::case14_mod(), 4, 5, 1.0);
    Scenario s = scenario_from_case(tight);
    s.Pd *= 1.4;
    s.Qd *= 1.4;
    const auto ds = label_scenarios(tight, {s}, {});
    CHECK(ds.scenarios.empty());
    CHECK(ds.n_generated == 1);
    CHECK(ds.n_infeasible + ds.n_failed == 1);
}

TEST_CASE("empty input gives an empty dataset with undefined calibration") {
    const Case c = fixtures::case14();
    const auto ds = label_scenarios(c, {}, {});
    CHECK(ds.scenarios.empty());
    CHECK_FALSE(ds.calibration.defined);
}

TEST_CASE("labeled scenarios are feasible and calibrated") {
    const Dataset& ds = small_labeled();
    REQUIRE(ds.scenarios.size() >= 25);
    CHECK(ds.n_failed == 0);
    CHECK(ds.calibration.defined);
    CHECK(ds.calibration.k < 0.0);
    CHECK(ds.case_fingerprint == case_fingerprint(fixtures::case14_mod()));
    for (const auto& s : ds.scenarios) {
        CHECK(s.labeled);
        CHECK(s.feasible);
        CHECK(ds.calibration.k * s.cost_replay + ds.calibration.b + s.z == doctest::Approx(kOptimumPoints));
    }
}

TEST_CASE("oracle replay reproduces the cached cost") {
    const Dataset& ds = small_labeled();
    const Case c = fixtures::case14_mod();
    for (std::size_t i = 0; i < 5; ++i) {
        Scenario s = ds.scenarios[i];
        REQUIRE(label_scenario(c, s, {}) == LabelOutcome::Labeled);
        CHECK(std::abs(s.cost_opt - ds.scenarios[i].cost_opt) / s.cost_opt <= 1e-6);
    }
}

TEST_CASE("threaded labeling matches serial labeling") {
    const Case c = fixtures::case14_mod();
    GenerationParams p;
    p.n = 30;
    p.seed = 5;
    LabelOptions opt;
    opt.threads = 3;
    check_same(label_scenarios(c, generate_scenarios(c, p), p, opt), small_labeled());
}

TEST_CASE("external labels round trip through ingestion") {
    const Dataset& ds = small_labeled();
    const Case c = fixtures::case14_mod();
    std::vector<ExternalLabel> labels;
    for (const auto& s : ds.scenarios) labels.push_back({s.id, true, s.Pg_opt, s.Vg_opt, s.cost_opt});
    const std::string path = tmp_path("labels.jsonl");
    save_labels(labels, path);
    const auto back = load_labels(path);
    REQUIRE(back.size() == labels.size());
    CHECK(back[3].Pg_opt == labels[3].Pg_opt);

    GenerationParams p = ds.params;
    auto scen = generate_scenarios(c, p);
    const auto ingested = ingest_labels(c, scen, back, p);
    CHECK(ingested.scenarios.size() == ds.scenarios.size());
    CHECK(ingested.n_failed == p.n - ds.scenarios.size());
    CHECK(ingested.calibration.k == ds.calibration.k);
    fs::remove(path);
}

TEST_CASE("split partitions and recalibrates on train") {
    const Dataset& ds = small_labeled();
    const auto [train, test] = split(ds, std::size_t{20}, 3);
    CHECK(train.scenarios.size() == 20);
    CHECK(test.scenarios.size() == ds.scenarios.size() - 20);
    std::vector<std::uint64_t> ids;
    for (const auto& s : train.scenarios) ids.push_back(s.id);
    for (const auto& s : test.scenarios) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
    CHECK(ids.size() == ds.scenarios.size());

    const Calibration cal = calibrate(train.scenarios);
    CHECK(train.calibration.k == cal.k);
    CHECK(test.calibration.k == cal.k);
    CHECK(test.calibration.b == cal.b);

    const auto [again, rest] = split(ds, std::size_t{20}, 3);
    CHECK(again.scenarios.front().id == train.scenarios.front().id);

    const auto [all, none] = split(ds, 1.0, 9);
    CHECK(none.scenarios.empty());
    CHECK(all.scenarios.size() == ds.scenarios.size());
    CHECK_THROWS_AS(split(ds, 1.5, 1), std::invalid_argument);
}

TEST_CASE("take_fraction rounds up") {
    const Dataset& ds = small_labeled();
    const auto n = ds.scenarios.size();
    CHECK(take_fraction(ds, 0.18, 1).scenarios.size() == static_cast<std::size_t>(std::ceil(0.18 * double(n))));
    CHECK(take_fraction(ds, 1.0, 1).scenarios.size() == n);
}

TEST_CASE("dataset round trip in both formats") {
    const Dataset& ds = small_labeled();
    for (const char* ext : {".jsonl", ".bin"}) {
        const std::string path = tmp_path(std::string("rt") + ext);
        save_dataset(ds, path);
        check_same(load_dataset(path, ds.case_fingerprint), ds);
        fs::remove(path);
    }
}

TEST_CASE("truncated or edited files are rejected") {
    const Dataset& ds = small_labeled();
    for (const char* ext : {".jsonl", ".bin"}) {
        const std::string path = tmp_path(std::string("trunc") + ext);
        save_dataset(ds, path);
        const std::string bytes = slurp(path);
        dump(path, bytes.substr(0, bytes.size() * 2 / 3));
        CHECK_THROWS_AS(load_dataset(path), DatasetError);
        std::string edited = bytes;
        edited[edited.size() - 20] ^= 0x01;
        dump(path, edited);
        CHECK_THROWS_AS(load_dataset(path), DatasetError);
        fs::remove(path);
    }
    CHECK_THROWS_AS(load_dataset(tmp_path("missing.jsonl")), DatasetError);
}

TEST_CASE("fingerprint mismatch is rejected") {
    const Dataset& ds = small_labeled();
    const std::string path = tmp_path("fp.jsonl");
    save_dataset(ds, path);
    CHECK_THROWS_AS(load_dataset(path, case_fingerprint(fixtures::case14())), DatasetError);
    CHECK_NOTHROW(load_dataset(path, case_fingerprint(fixtures::case14_mod())));
    fs::remove(path);
}

TEST_CASE("unknown version is rejected") {
    Dataset ds = small_labeled();
    ds.version = kDatasetVersion + 1;
    const std::string path = tmp_path("ver.jsonl");
    save_dataset(ds, path);
    CHECK_THROWS_AS(load_dataset(path), DatasetError);
    fs::remove(path);
}

TEST_CASE("saving is deterministic") {
    const Dataset& ds = small_labeled();
    const std::string a = tmp_path("det_a.jsonl"), b = tmp_path("det_b.jsonl");
    save_dataset(ds, a);
    save_dataset(ds, b);
    CHECK(slurp(a) == slurp(b));
    fs::remove(a);
    fs::remove(b);
}
