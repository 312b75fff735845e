#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gridppo/environment.hpp"
#include "gridppo/imitation.hpp"

using namespace gridppo;

namespace {

const Dataset& labeled() {
    static const Dataset ds = [] {
        const Case c = fixtures::case14_mod();
        GenerationParams p;
        p.n = 200;
        p.seed = 23;
        return label_scenarios(c, generate_scenarios(c, p), p);
    }();
    return ds;
}

Dataset with(std::vector<Scenario> s) {
    Dataset d = labeled();
    d.scenarios = std::move(s);
    return d;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

// Actor whose output is `target` (normalized) regardless of input.
Policy constant_policy(const Case& c, const Vec& target) {
    Policy p;
    p.actor.layers.push_back({Mat::Zero(action_width(c), actor_input_width(c)), target.unaryExpr(&logit),
                              nn::Activation::Sigmoid});
    p.log_std = Vec::Constant(action_width(c), -1.0);
    return p;
}

}  // namespace

TEST_CASE("optimizer names") {
    CHECK(optimizer_from_string("adam") == Optimizer::Adam);
    CHECK(std::string(to_string(Optimizer::Sgd)) == "sgd");
    CHECK_THROWS_AS(optimizer_from_string("rmsprop"), std::invalid_argument);
}

TEST_CASE("examples carry loads and normalized labels") {
    const Case c = fixtures::case14_mod();
    const auto& s = labeled().scenarios.front();
    const auto set = make_examples(c, {s});
    CHECK(set.X.cols() == 28);
    CHECK(set.Y.cols() == 10);
    CHECK(set.X(0, 2) == s.Pd(2) / c.baseMVA);
    CHECK(set.X(0, 14 + 2) == s.Qd(2) / c.baseMVA);
    CHECK(set.Y.row(0).transpose() == normalize_setpoints(c, s.Pg_opt, s.Vg_opt));
    CHECK(set.Y.minCoeff() > 0.0);
    CHECK(set.Y.maxCoeff() < 1.0);
    Scenario raw = s;
    raw.labeled = false;
    CHECK_THROWS_AS(make_examples(c, {raw}), std::invalid_argument);
}

TEST_CASE("eval_mse in physical units") {
    const Case c = fixtures::case14_mod();
    std::vector<Scenario> sc(labeled().scenarios.begin(), labeled().scenarios.begin() + 5);
    const Vec target = Vec::LinSpaced(10, 0.2, 0.8);
    const Policy p = constant_policy(c, target);
    Vec Pg, Vg;
    denormalize_setpoints(c, target, Pg, Vg);

    for (auto& s : sc) s.Pg_opt = Pg, s.Vg_opt = Vg;
    auto r = eval_mse(c, p, sc);
    CHECK(r.mse_p <= 1e-20);
    CHECK(r.mse_v <= 1e-20);

    for (auto& s : sc) s.Pg_opt = Pg.array() + 1.0, s.Vg_opt = Vg.array() - 1e-3;
    r = eval_mse(c, p, sc);
    CHECK(r.mse_p == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.mse_v == doctest::Approx(1e-6).epsilon(1e-6));
    CHECK(r.rmse_p() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("single example is memorized") {
    const Case c = fixtures::case14_mod();
    Rng rng(1);
    auto p = make_policy(28, {64, 64}, 10, -1.0, rng);
    PretrainOptions o;
    o.epochs = 1500;
    o.lr = 3e-3;
    o.holdout = 0.0;
    const auto r = pretrain_actor(c, with({labeled().scenarios.front()}), p, o);
    CHECK(r.n_train == 1);
    CHECK(r.n_heldout == 0);
    CHECK(std::isnan(r.curve.back().heldout_mse));
    CHECK(r.curve.back().train_mse < 1e-5);
    CHECK(r.train.rmse_p() < 0.1);
}

TEST_CASE("constant labels give a constant actor at the label") {
    const Case c = fixtures::case14_mod();
    std::vector<Scenario> sc(labeled().scenarios.begin(), labeled().scenarios.begin() + 50);
    // Interior targets; units pinned at a limit sit in the sigmoid tails and converge slowly.
    Vec Pg, Vg;
    denormalize_setpoints(c, Vec::LinSpaced(10, 0.15, 0.85), Pg, Vg);
    for (auto& s : sc) s.Pg_opt = Pg, s.Vg_opt = Vg;
    Rng rng(2);
    auto p = make_policy(28, {32}, 10, -1.0, rng);
    PretrainOptions o;
    o.epochs = 2000;
    o.batch = 16;
    o.lr = 3e-3;
    o.holdout = 0.0;
    pretrain_actor(c, with(sc), p, o);
    const auto set = make_examples(c, sc);
    const Mat mu = p.mean(set.X);
    CHECK((mu.rowwise() - set.Y.row(0)).cwiseAbs().maxCoeff() < 5e-3);
}

TEST_CASE("pretraining is deterministic and held-out loss falls") {
    const Case c = fixtures::case14_mod();
    PretrainOptions o;
    o.epochs = 30;
    o.holdout = 0.1;
    o.seed = 4;
    auto run = [&] {
        Rng rng(3);
        auto p = make_policy(28, {64, 64}, 10, -1.0, rng);
        auto r = pretrain_actor(c, labeled(), p, o);
        return std::make_pair(nn::flatten(p.actor), r);
    };
    const auto [a, ra] = run();
    const auto [b, rb] = run();
    CHECK(a == b);
    REQUIRE(ra.curve.size() == 30);
    CHECK(ra.n_heldout == 20);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 5; ++i) first += ra.curve[static_cast<std::size_t>(i)].heldout_mse;
    for (int i = 25; i < 30; ++i) last += ra.curve[static_cast<std::size_t>(i)].heldout_mse;
    CHECK(last < first);
    // Smoothed held-out curve over consecutive 5-epoch windows.
    double prev = first;
    int rises = 0;
    for (int w = 5; w < 30; w += 5) {
        double cur = 0.0;
        for (int i = w; i < w + 5; ++i) cur += ra.curve[static_cast<std::size_t>(i)].heldout_mse;
        if (cur > prev) ++rises;
        prev = cur;
    }
    CHECK(rises <= 1);
}

TEST_CASE("sgd variant trains") {
    const Case c = fixtures::case14_mod();
    Rng rng(6);
    auto p = make_policy(28, {64, 64}, 10, -1.0, rng);
    PretrainOptions o;
    o.epochs = 20;
    o.optimizer = Optimizer::Sgd;
    o.lr = 0.05;
    const auto r = pretrain_actor(c, labeled(), p, o);
    CHECK(r.curve.back().train_mse < r.curve.front().train_mse);
}

TEST_CASE("pretraining rejects bad input") {
    const Case c = fixtures::case14_mod();
    Rng rng(6);
    auto p = make_policy(28, {8}, 10, -1.0, rng);
    CHECK_THROWS_AS(pretrain_actor(c, with({}), p, {}), std::invalid_argument);
    auto wrong = make_policy(38, {8}, 10, -1.0, rng);
    CHECK_THROWS_AS(pretrain_actor(c, labeled(), wrong, {}), std::invalid_argument);
}
