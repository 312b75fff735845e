#include "gridppo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gridppo {

double discounted_return(const std::vector<double>& rewards, double gamma) {
    double r = 0.0;
    for (std::size_t t = rewards.size(); t-- > 0;) r = rewards[t] + gamma * r;
    return r;
}

GaeResult compute_gae(const std::vector<Transition>& traj, const GaeConfig& cfg, double bootstrap_value) {
    const auto n = static_cast<Eigen::Index>(traj.size());
    GaeResult out{Vec::Zero(n), Vec::Zero(n)};
    double next_value = bootstrap_value;
    double next_adv = 0.0;
    for (Eigen::Index t = n - 1; t >= 0; --t) {
        const auto& tr = traj[static_cast<std::size_t>(t)];
        const double v_next = tr.done ? 0.0 : next_value;
        const double carry = tr.done ? 0.0 : next_adv;
        const double delta = tr.reward + cfg.gamma * v_next - tr.value;
        out.advantages(t) = delta + cfg.gamma * cfg.lam * carry;
        out.returns(t) = out.advantages(t) + tr.value;
        next_value = tr.value;
        next_adv = out.advantages(t);
    }
    return out;
}

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
    if (!(clip_eps > 0.0)) throw std::invalid_argument("clip_eps must be positive");
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(ratio * advantage, clipped * advantage);
}

ScenarioEnv::ScenarioEnv(const Case& c, EnvConfig cfg, Calibration cal, std::vector<Scenario> pool)
    : env_(c, cfg, cal), pool_(std::move(pool)) {
    if (pool_.empty()) throw std::invalid_argument("scenario pool is empty");
}

Vec ScenarioEnv::reset(Rng& rng) {
    const std::size_t i = static_cast<std::size_t>(rng() % pool_.size());
    return env_.reset(pool_[i]);
}

Environment::Step ScenarioEnv::step(const Vec& action) {
    const auto r = env_.step(action);
    return {r.next_state, r.reward, r.done};
}

namespace {

double value_of(const Critic& critic, const Vec& state) {
    return nn::forward(critic, Mat(state.transpose()))(0, 0);
}

}  // namespace

Rollout collect_rollouts(Environment& env, const Policy& policy, const Critic& critic, int n_steps, Rng& rng) {
    Rollout out;
    out.transitions.reserve(static_cast<std::size_t>(std::max(n_steps, 0)));
    Vec state = env.reset(rng);
    double episode_return = 0.0;
    for (int k = 0; k < n_steps; ++k) {
        Transition tr;
        tr.state = state;
        const Vec mean = policy.mean(Mat(state.transpose())).row(0).transpose();
        tr.action = nn::sample_action<double>(mean, policy.log_std, rng);
        tr.log_prob = nn::gaussian_log_prob<double>(mean, policy.log_std, tr.action);
        tr.value = value_of(critic, state);
        const auto s = env.step(tr.action);
        tr.reward = s.reward;
        tr.done = s.done;
        episode_return += s.reward;
        out.transitions.push_back(std::move(tr));
        if (s.done) {
            out.episode_returns.push_back(episode_return);
            episode_return = 0.0;
            if (k + 1 < n_steps) state = env.reset(rng);
        } else {
            state = s.next_state;
        }
    }
    if (!out.transitions.empty() && !out.transitions.back().done) out.bootstrap_value = value_of(critic, state);
    return out;
}

Policy make_policy(int input_width, const std::vector<int>& hidden, int action_width, double log_std_init, Rng& rng) {
    std::vector<int> widths{input_width};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(action_width);
    Policy p;
    p.actor = nn::make_mlp<double>(widths, nn::Activation::Relu, nn::Activation::Sigmoid, rng);
    p.log_std = Vec::Constant(action_width, log_std_init);
    return p;
}

Critic make_critic(int state_width, const std::vector<int>& hidden, Rng& rng) {
    std::vector<int> widths{state_width};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    return nn::make_mlp<double>(widths, nn::Activation::Relu, nn::Activation::Linear, rng);
}

UpdateStats ppo_update(Policy& policy, Critic& critic, Optimizers& opt, const std::vector<Transition>& batch,
                       const GaeResult& gae, const PpoConfig& cfg, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) throw std::invalid_argument("ppo_update: empty batch");
    if (cfg.epochs < 1 || cfg.minibatch < 1) throw std::invalid_argument("ppo_update: epochs and minibatch must be >= 1");
    const auto sd = batch.front().state.size();
    const auto ad = batch.front().action.size();

    Mat S(n, sd), A(n, ad);
    Vec old_logp(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& tr = batch[static_cast<std::size_t>(i)];
        S.row(i) = tr.state.transpose();
        A.row(i) = tr.action.transpose();
        old_logp(i) = tr.log_prob;
    }
    Vec adv = gae.advantages;
    if (cfg.normalize_advantages && n > 1) {
        const double mean = adv.mean();
        const double sdv = std::sqrt((adv.array() - mean).square().sum() / static_cast<double>(n - 1));
        adv = (adv.array() - mean) / (sdv + 1e-8);
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    UpdateStats st;
    double ratio_sum = 0.0, clipped = 0.0, actor_loss = 0.0, critic_loss = 0.0, kl = 0.0;
    long count = 0, batches = 0;
    bool first = true;
    bool stop = false;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
        for (Eigen::Index start = 0; start < n; start += cfg.minibatch) {
            const Eigen::Index b = std::min<Eigen::Index>(cfg.minibatch, n - start);
            Mat Sb(b, sd), Ab(b, ad);
            Vec lp0(b), Ab_adv(b), Rb(b);
            for (Eigen::Index k = 0; k < b; ++k) {
                const auto i = order[static_cast<std::size_t>(start + k)];
                Sb.row(k) = S.row(i);
                Ab.row(k) = A.row(i);
                lp0(k) = old_logp(i);
                Ab_adv(k) = adv(i);
                Rb(k) = gae.returns(i);
            }

            // Actor.
            nn::ForwardCache<double> acache;
            const Mat mu = policy.mean(Sb, &acache);
            const Vec logp = nn::gaussian_log_prob_rows<double>(mu, policy.log_std, Ab);
            const Vec ratio = (logp - lp0).array().exp();
            // Policy already moved too far from the one that collected the batch.
            if (cfg.target_kl > 0.0 && (lp0 - logp).mean() > 1.5 * cfg.target_kl) {
                stop = true;
                break;
            }
            Vec dlogp(b);
            double surr = 0.0;
            long clip_here = 0;
            for (Eigen::Index k = 0; k < b; ++k) {
                const double r = ratio(k), a = Ab_adv(k);
                const double s = clipped_surrogate(r, a, cfg.clip_eps);
                surr += s;
                // Gradient flows only through the unclipped term when it is the minimum.
                dlogp(k) = (r * a <= s) ? -a * r / static_cast<double>(b) : 0.0;
                if (std::abs(r - 1.0) > cfg.clip_eps) ++clip_here;
                kl += lp0(k) - logp(k);
            }
            const double entropy = nn::gaussian_entropy<double>(policy.log_std);
            const double aloss = -surr / static_cast<double>(b) - cfg.entropy_coef * entropy;
            const Vec inv_var = (-2.0 * policy.log_std.array()).exp();
            const Mat diff = Ab - mu;
            const Mat dmu = dlogp.asDiagonal() * (diff * inv_var.asDiagonal());
            const Mat zsq = diff.array().square().matrix() * inv_var.asDiagonal();
            const Vec dlog_std = ((zsq.array() - 1.0).colwise() * dlogp.array()).colwise().sum().transpose().matrix() -
                                 Vec::Constant(ad, cfg.entropy_coef);
            const auto ga = nn::backward(policy.actor, acache, dmu);
            Vec pa(policy.actor.param_count() + ad), gv(pa.size());
            pa << nn::flatten(policy.actor), policy.log_std;
            gv << nn::flatten(ga), dlog_std;

            // Critic.
            nn::ForwardCache<double> ccache;
            const Vec v = nn::forward(critic, Sb, &ccache).col(0);
            const Vec err = Rb - v;
            const double closs = err.squaredNorm() / static_cast<double>(b);
            const auto gc = nn::backward(critic, ccache, Mat(-2.0 * err / static_cast<double>(b)));
            Vec pc = nn::flatten(critic);
            const Vec gcv = nn::flatten(gc);

            if (!std::isfinite(aloss) || !std::isfinite(closs) || !gv.allFinite() || !gcv.allFinite()) {
                std::ostringstream os;
                os << "non-finite PPO update (epoch " << epoch << ", actor loss " << aloss << ", critic loss " << closs
                   << ", max ratio " << ratio.maxCoeff() << ")";
                throw NumericalError(os.str());
            }
            nn::adam_step(pa, gv, opt.actor, cfg.actor_lr);
            nn::assign(policy.actor, Vec(pa.head(pa.size() - ad)));
            policy.log_std = pa.tail(ad).cwiseMax(cfg.log_std_min);
            nn::adam_step(pc, gcv, opt.critic, cfg.critic_lr);
            nn::assign(critic, pc);

            if (first) {
                st.first_clip_fraction = static_cast<double>(clip_here) / static_cast<double>(b);
                first = false;
            }
            ratio_sum += ratio.sum();
            clipped += static_cast<double>(clip_here);
            count += b;
            actor_loss += aloss;
            critic_loss += closs;
            st.entropy = entropy;
            ++batches;
        }
        if (stop) break;
        st.epochs_run = epoch + 1;
    }
    if (count == 0) return st;
    st.mean_ratio = ratio_sum / static_cast<double>(count);
    st.clip_fraction = clipped / static_cast<double>(count);
    st.actor_loss = actor_loss / static_cast<double>(batches);
    st.critic_loss = critic_loss / static_cast<double>(batches);
    st.approx_kl = kl / static_cast<double>(count);
    return st;
}

void train_ppo(Environment& env, Policy& policy, Critic& critic, Optimizers& opt, const PpoConfig& cfg,
               const GaeConfig& gae, Rng& rng, const std::function<bool(const UpdateReport&)>& on_update) {
    for (int u = 0; u < cfg.updates; ++u) {
        const Rollout ro = collect_rollouts(env, policy, critic, cfg.rollout_steps, rng);
        const GaeResult g = compute_gae(ro.transitions, gae, ro.bootstrap_value);
        UpdateReport rep;
        rep.update = u + 1;
        rep.stats = ppo_update(policy, critic, opt, ro.transitions, g, cfg, rng);
        if (!ro.episode_returns.empty())
            rep.mean_return = std::accumulate(ro.episode_returns.begin(), ro.episode_returns.end(), 0.0) /
                              static_cast<double>(ro.episode_returns.size());
        if (on_update && !on_update(rep)) break;
    }
}

}  // namespace gridppo
