#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "gridppo/opf.hpp"
#include "gridppo/power_flow.hpp"

using namespace gridppo;

namespace {

Vec ref_vec(const nlohmann::json& j) {
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

Vec random_point(const OpfNlp& nlp, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec x = nlp.initial_point();
    for (Eigen::Index k = 0; k < nlp.vm_offset(); ++k) x(k) = 0.3 * u(rng);
    for (Eigen::Index k = nlp.vm_offset(); k < nlp.pg_offset(); ++k) x(k) += 0.05 * u(rng);
    for (Eigen::Index k = nlp.pg_offset(); k < nlp.nx(); ++k) x(k) += 0.2 * u(rng);
    return x;
}

double rel_err(const Mat& a, const Mat& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

// Applies optimal setpoints and runs the power flow.
PfSolution replay(Case c, const OpfSolution& s) {
    for (std::size_t g = 0; g < c.gen_count(); ++g) {
        c.generators[g].Pg = s.Pg_opt(static_cast<Eigen::Index>(g));
        c.generators[g].Vg = s.Vg_opt(static_cast<Eigen::Index>(g));
    }
    return solve_pf(c);
}

}  // namespace

TEST_CASE("gen_cost") {
    Case c = fixtures::two_bus(0.0, 0.1, 10.0, 0.0);
    CHECK(gen_cost(c, Vec::Constant(1, 100.0)) == doctest::Approx(4100.0));
    c.generators[0].cost = {};
    CHECK(gen_cost(c, Vec::Constant(1, 100.0)) == 0.0);
    CHECK_THROWS_AS(gen_cost(c, Vec::Zero(2)), std::invalid_argument);
}

TEST_CASE("nlp derivatives agree with finite differences") {
    for (const Case& c : {fixtures::case14(), fixtures::case14_mod()}) {
        const OpfNlp nlp(c);
        std::mt19937_64 rng(11);
        std::normal_distribution<double> n01;
        const double h = 1e-6;
        for (int trial = 0; trial < 5; ++trial) {
            const Vec x = random_point(nlp, rng);
            const auto con = nlp.constraints(x);
            Vec lam(nlp.neq()), mu(nlp.niq());
            for (auto& v : lam) v = n01(rng);
            for (auto& v : mu) v = std::abs(n01(rng));
            Mat dg_fd(nlp.nx(), nlp.neq()), dh_fd(nlp.nx(), nlp.niq()), H_fd(nlp.nx(), nlp.nx());
            Vec df_fd(nlp.nx());
            const double cm = 1e-4;
            auto lagr_grad = [&](const Vec& xx) {
                const auto cc = nlp.constraints(xx);
                return Vec(cm * nlp.cost_gradient(xx) + cc.dg * lam + cc.dh * mu);
            };
            for (Eigen::Index k = 0; k < nlp.nx(); ++k) {
                Vec xp = x, xm = x;
                xp(k) += h;
                xm(k) -= h;
                const auto cp = nlp.constraints(xp), cmn = nlp.constraints(xm);
                dg_fd.row(k) = (cp.g - cmn.g).transpose() / (2 * h);
                dh_fd.row(k) = (cp.h - cmn.h).transpose() / (2 * h);
                df_fd(k) = (nlp.cost(xp) - nlp.cost(xm)) / (2 * h);
                H_fd.col(k) = (lagr_grad(xp) - lagr_grad(xm)) / (2 * h);
            }
            CHECK(rel_err(con.dg, dg_fd) < 1e-6);
            CHECK(rel_err(con.dh, dh_fd) < 1e-6);
            CHECK(rel_err(nlp.cost_gradient(x), df_fd) < 1e-6);
            const Mat H = nlp.lagrangian_hessian(x, lam, mu, cm);
            CHECK(rel_err(H, H_fd) < 1e-5);
            CHECK((H - H.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("single generator toy case dispatches load plus losses") {
    const Case c = fixtures::two_bus(0.01, 0.1, 30.0, 10.0);
    const auto s = solve_opf(c);
    REQUIRE(s.status == OpfStatus::Optimal);
    const auto pf = replay(c, s);
    REQUIRE(pf.converged);
    CHECK(s.Pg_opt(0) == doctest::Approx(pf.Pg(0)).epsilon(1e-5));
    CHECK(s.Pg_opt(0) > 30.0);
    CHECK(s.objective == doctest::Approx(gen_cost(c, s.Pg_opt)));
}

TEST_CASE("case14 original limits match reference optimum") {
    const Case c = fixtures::case14();
    const auto& ref = fixtures::reference()["opf_nominal"];
    const auto s = solve_opf(c);
    REQUIRE(s.status == OpfStatus::Optimal);
    CHECK(std::abs(s.objective - ref["objective"].get<double>()) / ref["objective"].get<double>() < 1e-3);
    CHECK((s.Pg_opt - ref_vec(ref["Pg"])).cwiseAbs().maxCoeff() < 0.1);
    CHECK((s.Vg_opt - ref_vec(ref["Vg"])).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(s.residuals.gradient <= 1e-6);
    CHECK(s.residuals.feasibility <= 1e-6);
    const auto pf = replay(c, s);
    REQUIRE(pf.converged);
    CHECK(check_violations(c, pf, 1e-4).empty());
}

TEST_CASE("case14 with line 4-5 at 32 MVA") {
    const Case c = fixtures::case14_mod();
    const auto& ref = fixtures::reference()["opf_modified"];
    const auto s = solve_opf(c);
    REQUIRE(s.status == OpfStatus::Optimal);
    CHECK(std::abs(s.objective - ref["objective"].get<double>()) / ref["objective"].get<double>() < 1e-3);
    const auto pf = replay(c, s);
    REQUIRE(pf.converged);
    CHECK(check_violations(c, pf, 1e-4).empty());
}

TEST_CASE("case14 modified at 1.4x load") {
    Case c = fixtures::case14_mod();
    for (auto& b : c.buses) {
        b.Pd *= 1.4;
        b.Qd *= 1.4;
    }
    const auto& ref = fixtures::reference();
    const auto s = solve_opf(c);
    REQUIRE(ref["opf_modified_x1.4"]["success"].get<bool>());
    REQUIRE(s.status == OpfStatus::Optimal);
    CHECK(std::abs(s.objective - ref["opf_modified_x1.4"]["objective"].get<double>()) /
              ref["opf_modified_x1.4"]["objective"].get<double>() <
          1e-3);
    const auto flows = branch_flows(c, s.V_opt);
    for (std::size_t l = 0; l < c.branches.size(); ++l)
        if (c.branches[l].from == 4 && c.branches[l].to == 5) {
            CHECK(std::abs(flows.Sf(static_cast<Eigen::Index>(l))) <= 32.0 + 1e-4);
            CHECK(std::abs(flows.St(static_cast<Eigen::Index>(l))) <= 32.0 + 1e-4);
        }

    const Case tight = override_branch_limit(c, 4, 5, 1.0);
    REQUIRE_FALSE(ref["opf_modified_x1.4_line45_1MVA"]["success"].get<bool>());
    CHECK(solve_opf(tight).status != OpfStatus::Optimal);
}

TEST_CASE("perturbed scenarios match reference optima") {
    const auto& cases = fixtures::reference()["opf_perturbed"];
    for (const auto& sc : cases) {
        for (const char* which : {"original", "modified"}) {
            Case c = std::string(which) == "original" ? fixtures::case14() : fixtures::case14_mod();
            const auto& mult = sc["multipliers"];
            for (std::size_t i = 0; i < c.bus_count(); ++i) {
                c.buses[i].Pd *= mult[i].get<double>();
                c.buses[i].Qd *= mult[i].get<double>();
            }
            const auto s = solve_opf(c);
            const auto& r = sc[which];
            CAPTURE(which);
            REQUIRE(r["success"].get<bool>() == (s.status == OpfStatus::Optimal));
            if (s.status == OpfStatus::Optimal)
                CHECK(std::abs(s.objective - r["objective"].get<double>()) / r["objective"].get<double>() < 1e-3);
        }
    }
}
