#include "gridppo/power_flow.hpp"

#include <cmath>
#include <numeric>

namespace gridppo {
namespace {

struct BusSets {
    std::vector<Eigen::Index> pv, pq, pvpq;
};

BusSets classify(const std::vector<BusKind>& kinds) {
    BusSets s;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        if (kinds[i] == BusKind::PV) s.pv.push_back(k);
        if (kinds[i] == BusKind::PQ) s.pq.push_back(k);
    }
    s.pvpq = s.pv;
    s.pvpq.insert(s.pvpq.end(), s.pq.begin(), s.pq.end());
    return s;
}

std::vector<BusKind> case_kinds(const Case& c) {
    std::vector<BusKind> k;
    for (const auto& b : c.buses) k.push_back(b.kind);
    return k;
}

// Scheduled complex injection per bus, p.u. `fixed_q` holds the pinned
// reactive output of Q-limited generators (NaN otherwise).
CVec scheduled_injection(const Case& c, const std::vector<double>& fixed_q) {
    const auto n = static_cast<Eigen::Index>(c.bus_count());
    CVec s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = c.buses[static_cast<std::size_t>(i)];
        s(i) = -Complex(b.Pd, b.Qd);
    }
    for (std::size_t g = 0; g < c.gen_count(); ++g) {
        const auto& gen = c.generators[g];
        const auto i = static_cast<Eigen::Index>(c.bus_index(gen.bus));
        const double q = (!fixed_q.empty() && !std::isnan(fixed_q[g])) ? fixed_q[g] : 0.0;
        s(i) += Complex(gen.Pg, q);
    }
    return s / c.baseMVA;
}

Vec mismatch_vector(const CMat& ybus, const CVec& V, const CVec& sbus, const BusSets& sets) {
    const CVec mis = (V.array() * (ybus * V).conjugate().array()).matrix() - sbus;
    const auto npvpq = static_cast<Eigen::Index>(sets.pvpq.size());
    const auto npq = static_cast<Eigen::Index>(sets.pq.size());
    Vec f(npvpq + npq);
    for (Eigen::Index k = 0; k < npvpq; ++k) f(k) = mis(sets.pvpq[static_cast<std::size_t>(k)]).real();
    for (Eigen::Index k = 0; k < npq; ++k) f(npvpq + k) = mis(sets.pq[static_cast<std::size_t>(k)]).imag();
    return f;
}

void jacobian_into(Mat& J, const CMat& ybus, const CVec& V, const BusSets& sets) {
    const auto d = sbus_derivatives(ybus, V);
    const auto npvpq = static_cast<Eigen::Index>(sets.pvpq.size());
    const auto npq = static_cast<Eigen::Index>(sets.pq.size());
    J.resize(npvpq + npq, npvpq + npq);
    for (Eigen::Index r = 0; r < npvpq; ++r) {
        const auto i = sets.pvpq[static_cast<std::size_t>(r)];
        for (Eigen::Index k = 0; k < npvpq; ++k) J(r, k) = d.dVa(i, sets.pvpq[static_cast<std::size_t>(k)]).real();
        for (Eigen::Index k = 0; k < npq; ++k) J(r, npvpq + k) = d.dVm(i, sets.pq[static_cast<std::size_t>(k)]).real();
    }
    for (Eigen::Index r = 0; r < npq; ++r) {
        const auto i = sets.pq[static_cast<std::size_t>(r)];
        for (Eigen::Index k = 0; k < npvpq; ++k)
            J(npvpq + r, k) = d.dVa(i, sets.pvpq[static_cast<std::size_t>(k)]).imag();
        for (Eigen::Index k = 0; k < npq; ++k)
            J(npvpq + r, npvpq + k) = d.dVm(i, sets.pq[static_cast<std::size_t>(k)]).imag();
    }
}

struct NewtonResult {
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
    std::string message;
};

NewtonResult newton(const CMat& ybus, CVec& V, const CVec& sbus, const BusSets& sets, const PfOptions& opt, Mat& J) {
    NewtonResult res;
    Vec Va = V.array().arg();
    Vec Vm = V.cwiseAbs();
    Vec f = mismatch_vector(ybus, V, sbus, sets);
    res.max_mismatch = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    const auto npvpq = static_cast<Eigen::Index>(sets.pvpq.size());
    const auto npq = static_cast<Eigen::Index>(sets.pq.size());

    while (res.max_mismatch > opt.tolerance) {
        if (res.iterations >= opt.max_iterations) {
            res.message = "Newton iteration limit reached";
            return res;
        }
        ++res.iterations;
        jacobian_into(J, ybus, V, sets);
        Eigen::PartialPivLU<Mat> lu(J);
        if (!(lu.rcond() > 1e-14)) {
            res.message = "singular Jacobian";
            return res;
        }
        const Vec dx = lu.solve(-f);
        if (!dx.allFinite()) {
            res.message = "singular Jacobian";
            return res;
        }
        for (Eigen::Index k = 0; k < npvpq; ++k) Va(sets.pvpq[static_cast<std::size_t>(k)]) += dx(k);
        for (Eigen::Index k = 0; k < npq; ++k) Vm(sets.pq[static_cast<std::size_t>(k)]) += dx(npvpq + k);
        for (Eigen::Index i = 0; i < V.size(); ++i) V(i) = std::polar(Vm(i), Va(i));
        f = mismatch_vector(ybus, V, sbus, sets);
        res.max_mismatch = f.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(res.max_mismatch) || res.max_mismatch > 1e10) {
            res.message = "Newton iterates diverged";
            return res;
        }
    }
    res.converged = true;
    return res;
}

// Splits a bus total across its generators in proportion to their Q ranges,
// so that all units reach their limits together.
void distribute_q(const Case& c, const std::vector<std::size_t>& gens, double total, Vec& Qg) {
    double qmin_sum = 0.0, range_sum = 0.0;
    for (auto g : gens) {
        qmin_sum += c.generators[g].Qmin;
        range_sum += c.generators[g].Qmax - c.generators[g].Qmin;
    }
    for (auto g : gens) {
        const auto& gen = c.generators[g];
        const auto gi = static_cast<Eigen::Index>(g);
        if (gens.size() == 1) {
            Qg(gi) = total;
        } else if (range_sum > 0.0 && std::isfinite(range_sum)) {
            Qg(gi) = gen.Qmin + (total - qmin_sum) * (gen.Qmax - gen.Qmin) / range_sum;
        } else {
            Qg(gi) = total / static_cast<double>(gens.size());
        }
    }
}

}  // namespace

SbusDerivatives sbus_derivatives(const CMat& ybus, const CVec& V) {
    const CVec I = ybus * V;
    const CVec Vnorm = V.array() / V.cwiseAbs().array().cast<Complex>();
    SbusDerivatives d;
    d.dVm = V.asDiagonal() * (ybus * Vnorm.asDiagonal()).conjugate();
    d.dVm.diagonal() += (I.conjugate().array() * Vnorm.array()).matrix();
    CMat t = -(ybus * V.asDiagonal());
    t.diagonal() += I;
    d.dVa = (Complex(0.0, 1.0) * V).asDiagonal() * t.conjugate();
    return d;
}

PowerFlowSolver::PowerFlowSolver(const Case& topology, PfOptions options)
    : options_(options), ybus_(build_ybus(topology)) {
    for (const auto& br : topology.branches) branch_y_.push_back(branch_admittance(br));
}

PfSolution PowerFlowSolver::solve(const Case& c) {
    return run(c, CVec::Ones(static_cast<Eigen::Index>(c.bus_count())));
}

PfSolution PowerFlowSolver::solve(const Case& c, const CVec& warm_start) {
    return run(c, warm_start);
}

PfSolution PowerFlowSolver::run(const Case& c, CVec V) {
    const auto ng = c.gen_count();
    const std::size_t slack = c.slack_index();
    std::vector<BusKind> kinds = case_kinds(c);
    std::vector<double> fixed_q(ng, std::nan(""));
    std::vector<std::vector<std::size_t>> gens_at(c.bus_count());
    for (std::size_t g = 0; g < ng; ++g) gens_at[c.bus_index(c.generators[g].bus)].push_back(g);
    // Voltage-controlled buses take their magnitude from the first generator.
    for (std::size_t i = 0; i < c.bus_count(); ++i) {
        if (kinds[i] != BusKind::PQ && !gens_at[i].empty()) {
            const auto k = static_cast<Eigen::Index>(i);
            V(k) = std::polar(c.generators[gens_at[i].front()].Vg, std::arg(V(k)));
        }
    }

    PfSolution sol;
    sol.Pg = Vec::Zero(static_cast<Eigen::Index>(ng));
    sol.Qg = Vec::Zero(static_cast<Eigen::Index>(ng));

    while (true) {
        const BusSets sets = classify(kinds);
        const CVec sbus = scheduled_injection(c, fixed_q);
        const auto nr = newton(ybus_, V, sbus, sets, options_, jacobian_);
        sol.iterations += nr.iterations;
        sol.max_mismatch = nr.max_mismatch;
        if (!nr.converged) {
            sol.V = V;
            sol.converged = false;
            sol.message = nr.message;
            return sol;
        }

        // Generator outputs from the realized injections.
        const CVec S = (V.array() * (ybus_ * V).conjugate().array()).matrix() * c.baseMVA;
        for (std::size_t g = 0; g < ng; ++g) sol.Pg(static_cast<Eigen::Index>(g)) = c.generators[g].Pg;
        std::vector<std::size_t> violating;
        for (std::size_t i = 0; i < c.bus_count(); ++i) {
            if (gens_at[i].empty()) continue;
            const auto& bus = c.buses[i];
            const auto k = static_cast<Eigen::Index>(i);
            std::vector<std::size_t> active;
            double pinned = 0.0;
            for (auto g : gens_at[i]) {
                if (std::isnan(fixed_q[g])) {
                    active.push_back(g);
                } else {
                    pinned += fixed_q[g];
                    sol.Qg(static_cast<Eigen::Index>(g)) = fixed_q[g];
                }
            }
            if (i == slack) {
                double others = 0.0;
                for (auto g : gens_at[i]) {
                    if (g != gens_at[i].front()) others += c.generators[g].Pg;
                }
                sol.Pg(static_cast<Eigen::Index>(gens_at[i].front())) = S(k).real() + bus.Pd - others;
            }
            if (active.empty()) continue;
            const double q_total = S(k).imag() + bus.Qd - pinned;
            distribute_q(c, active, q_total, sol.Qg);
            if (kinds[i] == BusKind::PV && options_.enforce_q_limits) {
                double qmax = 0.0, qmin = 0.0;
                for (auto g : active) {
                    qmax += c.generators[g].Qmax;
                    qmin += c.generators[g].Qmin;
                }
                if (q_total > qmax + options_.q_limit_tolerance || q_total < qmin - options_.q_limit_tolerance)
                    violating.push_back(i);
            }
        }

        if (violating.empty()) break;
        if (sol.q_passes >= options_.max_q_passes) {
            sol.V = V;
            sol.converged = false;
            sol.message = "reactive limit switching did not settle";
            return sol;
        }
        ++sol.q_passes;
        for (auto i : violating) {
            double qmax = 0.0;
            for (auto g : gens_at[i]) {
                if (std::isnan(fixed_q[g])) qmax += c.generators[g].Qmax;
            }
            const double q_total = S(static_cast<Eigen::Index>(i)).imag() + c.buses[i].Qd;
            const bool upper = q_total > qmax;
            for (auto g : gens_at[i]) {
                if (!std::isnan(fixed_q[g])) continue;
                fixed_q[g] = upper ? c.generators[g].Qmax : c.generators[g].Qmin;
                sol.q_limited.push_back(g);
            }
            kinds[i] = BusKind::PQ;
        }
    }

    sol.V = V;
    sol.converged = true;
    sol.Sf = Vec::Zero(static_cast<Eigen::Index>(c.branches.size()));
    sol.St = Vec::Zero(static_cast<Eigen::Index>(c.branches.size()));
    for (std::size_t l = 0; l < c.branches.size(); ++l) {
        const auto& br = c.branches[l];
        if (!br.in_service) continue;
        const auto f = static_cast<Eigen::Index>(c.bus_index(br.from));
        const auto t = static_cast<Eigen::Index>(c.bus_index(br.to));
        const auto& y = branch_y_[l];
        const Complex If = y.yff * V(f) + y.yft * V(t);
        const Complex It = y.ytf * V(f) + y.ytt * V(t);
        sol.Sf(static_cast<Eigen::Index>(l)) = std::abs(V(f) * std::conj(If)) * c.baseMVA;
        sol.St(static_cast<Eigen::Index>(l)) = std::abs(V(t) * std::conj(It)) * c.baseMVA;
    }
    return sol;
}

PfSolution solve_pf(const Case& c, const PfOptions& options) {
    PowerFlowSolver solver(c, options);
    return solver.solve(c);
}

Vec compute_mismatch(const Case& c, const CVec& V) {
    return mismatch_vector(build_ybus(c), V, scheduled_injection(c, {}), classify(case_kinds(c)));
}

Mat compute_jacobian(const Case& c, const CVec& V) {
    Mat J;
    jacobian_into(J, build_ybus(c), V, classify(case_kinds(c)));
    return J;
}

BranchFlows branch_flows(const Case& c, const CVec& V) {
    const auto nl = static_cast<Eigen::Index>(c.branches.size());
    BranchFlows out{CVec::Zero(nl), CVec::Zero(nl)};
    for (Eigen::Index l = 0; l < nl; ++l) {
        const auto& br = c.branches[static_cast<std::size_t>(l)];
        if (!br.in_service) continue;
        const auto y = branch_admittance(br);
        const auto f = static_cast<Eigen::Index>(c.bus_index(br.from));
        const auto t = static_cast<Eigen::Index>(c.bus_index(br.to));
        out.Sf(l) = V(f) * std::conj(y.yff * V(f) + y.yft * V(t)) * c.baseMVA;
        out.St(l) = V(t) * std::conj(y.ytf * V(f) + y.ytt * V(t)) * c.baseMVA;
    }
    return out;
}

double ViolationReport::pgen_total() const {
    return std::accumulate(pgen.begin(), pgen.end(), 0.0, [](double a, const Excess& e) { return a + e.amount; });
}

double ViolationReport::vbus_total() const {
    return std::accumulate(vbus.begin(), vbus.end(), 0.0, [](double a, const Excess& e) { return a + e.amount; });
}

double ViolationReport::branch_total() const {
    return std::accumulate(branch.begin(), branch.end(), 0.0,
                           [](double a, const BranchExcess& e) { return a + e.amount; });
}

ViolationReport check_violations(const Case& c, const PfSolution& sol, double tolerance) {
    if (!sol.converged) throw std::invalid_argument("check_violations needs a converged power flow");
    ViolationReport r;
    for (std::size_t g = 0; g < c.gen_count(); ++g) {
        const auto& gen = c.generators[g];
        const double p = sol.Pg(static_cast<Eigen::Index>(g));
        const double e = std::max({0.0, p - gen.Pmax, gen.Pmin - p});
        if (e > tolerance) r.pgen.push_back({g, e});
    }
    for (std::size_t i = 0; i < c.bus_count(); ++i) {
        const auto& b = c.buses[i];
        const double vm = std::abs(sol.V(static_cast<Eigen::Index>(i)));
        const double e = std::max({0.0, vm - b.Vmax, b.Vmin - vm});
        if (e > tolerance) r.vbus.push_back({i, e});
    }
    for (std::size_t l = 0; l < c.branches.size(); ++l) {
        const auto& br = c.branches[l];
        if (!br.has_limit()) continue;
        const auto k = static_cast<Eigen::Index>(l);
        if (const double e = sol.Sf(k) - br.S_max; e > tolerance) r.branch.push_back({l, BranchEnd::From, e});
        if (const double e = sol.St(k) - br.S_max; e > tolerance) r.branch.push_back({l, BranchEnd::To, e});
    }
    return r;
}

}  // namespace gridppo
