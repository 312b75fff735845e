#include "gridppo/imitation.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "gridppo/environment.hpp"

namespace gridppo {

const char* to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer optimizer_from_string(const std::string& s) {
    if (s == "adam") return Optimizer::Adam;
    if (s == "sgd") return Optimizer::Sgd;
    throw std::invalid_argument("unknown optimizer '" + s + "' (expected adam or sgd)");
}

double MseReport::rmse_p() const { return std::sqrt(mse_p); }
double MseReport::rmse_v() const { return std::sqrt(mse_v); }

LabeledSet make_examples(const Case& c, const std::vector<Scenario>& scenarios) {
    const auto n = static_cast<Eigen::Index>(scenarios.size());
    LabeledSet set{Mat(n, actor_input_width(c)), Mat(n, action_width(c))};
    const auto nb = static_cast<Eigen::Index>(c.bus_count());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = scenarios[static_cast<std::size_t>(i)];
        if (!s.labeled) throw std::invalid_argument("scenario " + std::to_string(s.id) + " has no oracle label");
        check_dimensions(c, s);
        set.X.row(i).head(nb) = s.Pd.transpose() / c.baseMVA;
        set.X.row(i).tail(nb) = s.Qd.transpose() / c.baseMVA;
        set.Y.row(i) = normalize_setpoints(c, s.Pg_opt, s.Vg_opt).transpose();
    }
    return set;
}

MseReport eval_mse(const Case& c, const Policy& policy, const std::vector<Scenario>& scenarios) {
    MseReport r;
    if (scenarios.empty()) return r;
    const LabeledSet set = make_examples(c, scenarios);
    const Mat mu = policy.mean(set.X);
    const auto ng = static_cast<Eigen::Index>(c.gen_count());
    double sp = 0.0, sv = 0.0;
    for (Eigen::Index i = 0; i < mu.rows(); ++i) {
        Vec Pg, Vg;
        denormalize_setpoints(c, mu.row(i).transpose(), Pg, Vg);
        const auto& s = scenarios[static_cast<std::size_t>(i)];
        sp += (Pg - s.Pg_opt).squaredNorm();
        sv += (Vg - s.Vg_opt).squaredNorm();
    }
    const double cells = static_cast<double>(mu.rows() * ng);
    r.mse_p = sp / cells;
    r.mse_v = sv / cells;
    return r;
}

namespace {

double normalized_mse(const Policy& policy, const LabeledSet& set) {
    if (set.X.rows() == 0) return std::numeric_limits<double>::quiet_NaN();
    return (policy.mean(set.X) - set.Y).squaredNorm() / static_cast<double>(set.Y.size());
}

}  // namespace

PretrainResult pretrain_actor(const Case& c, const Dataset& ds, Policy& policy, const PretrainOptions& opt) {
    if (ds.scenarios.empty()) throw std::invalid_argument("pretraining needs a non-empty labeled dataset");
    if (opt.epochs < 0 || opt.batch < 1 || !(opt.lr > 0.0)) throw std::invalid_argument("bad pretraining options");
    if (policy.input_width() != actor_input_width(c) || policy.action_width() != action_width(c))
        throw std::invalid_argument("actor shape does not match the case");

    // Hold out round(holdout·N), but always train on at least one scenario.
    auto n_train = static_cast<std::size_t>(std::llround((1.0 - opt.holdout) * static_cast<double>(ds.scenarios.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, ds.scenarios.size());
    const auto [train, held] = split(ds, n_train, opt.seed);
    const LabeledSet tr = make_examples(c, train.scenarios);
    const LabeledSet ho = make_examples(c, held.scenarios);

    PretrainResult out;
    out.n_train = train.scenarios.size();
    out.n_heldout = held.scenarios.size();
    nn::AdamState<double> adam;
    Rng rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto n = tr.X.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
        double loss_sum = 0.0;
        int batches = 0;
        for (Eigen::Index start = 0; start < n; start += opt.batch) {
            const Eigen::Index b = std::min<Eigen::Index>(opt.batch, n - start);
            Mat X(b, tr.X.cols()), Y(b, tr.Y.cols());
            for (Eigen::Index k = 0; k < b; ++k) {
                X.row(k) = tr.X.row(order[static_cast<std::size_t>(start + k)]);
                Y.row(k) = tr.Y.row(order[static_cast<std::size_t>(start + k)]);
            }
            nn::ForwardCache<double> cache;
            const Mat err = policy.mean(X, &cache) - Y;
            const double loss = err.squaredNorm() / static_cast<double>(err.size());
            if (!std::isfinite(loss)) throw NumericalError("non-finite imitation loss at epoch " + std::to_string(epoch));
            const auto g = nn::backward(policy.actor, cache, Mat(2.0 * err / static_cast<double>(err.size())));
            Vec p = nn::flatten(policy.actor);
            if (opt.optimizer == Optimizer::Adam) nn::adam_step(p, nn::flatten(g), adam, opt.lr);
            else nn::sgd_step(p, nn::flatten(g), opt.lr);
            nn::assign(policy.actor, p);
            loss_sum += loss;
            ++batches;
        }
        out.curve.push_back({epoch, loss_sum / batches, normalized_mse(policy, ho)});
    }
    out.train = eval_mse(c, policy, train.scenarios);
    out.heldout = eval_mse(c, policy, held.scenarios);
    return out;
}

void write_loss_curve(const std::vector<EpochLoss>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(10);
    out << "epoch,train_mse,heldout_mse\n";
    for (const auto& e : curve) out << e.epoch << ',' << e.train_mse << ',' << e.heldout_mse << '\n';
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace gridppo
