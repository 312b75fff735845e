#include "gridppo/opf.hpp"

#include <cmath>
#include <limits>

#include "gridppo/power_flow.hpp"

namespace gridppo {
namespace {

constexpr Complex kJ(0.0, 1.0);

struct Hess4 {
    CMat aa, av, va, vv;
};

// Second derivatives of lamᵀ·S with S = diag(V) conj(Y V), polar coordinates.
Hess4 d2_sbus(const CMat& Y, const CVec& V, const CVec& lam) {
    const CVec I = Y * V;
    const CMat diagV = V.asDiagonal();
    const CMat A = (lam.array() * V.array()).matrix().asDiagonal();
    const CMat C = A * (Y * diagV).conjugate();
    const CMat D = Y.adjoint() * diagV;
    CMat Dl = D * lam.asDiagonal();
    Dl.diagonal() -= D * lam;
    const CMat E = V.conjugate().asDiagonal() * Dl;
    const CMat F = C - A * I.conjugate().asDiagonal();
    const CMat G = V.cwiseAbs().cwiseInverse().cast<Complex>().asDiagonal();
    Hess4 h;
    h.aa = E + F;
    h.va = kJ * G * (E - F);
    h.av = h.va.transpose();
    h.vv = G * (C + C.transpose()) * G;
    return h;
}

// Second derivatives of lamᵀ·Sbr with Sbr = diag(Cbr V) conj(Ybr V).
Hess4 d2_sbr(const CMat& Cbr, const CMat& Ybr, const CVec& V, const CVec& lam) {
    const CMat A = Ybr.adjoint() * lam.asDiagonal() * Cbr;
    const CMat B = V.conjugate().asDiagonal() * A * V.asDiagonal();
    const CVec d = (A * V).array() * V.conjugate().array();
    const CVec e = (A.transpose() * V.conjugate()).array() * V.array();
    const CMat F = B + B.transpose();
    const CMat G = V.cwiseAbs().cwiseInverse().cast<Complex>().asDiagonal();
    Hess4 h;
    h.aa = F;
    h.aa.diagonal() -= d + e;
    CMat T = B - B.transpose();
    T.diagonal() += e - d;
    h.va = kJ * G * T;
    h.av = h.va.transpose();
    h.vv = G * F * G;
    return h;
}

struct BranchDerivs {
    CVec S;
    CMat dVa, dVm;
};

BranchDerivs branch_derivs(const CMat& Cbr, const CMat& Ybr, const CVec& V) {
    const CVec I = Ybr * V;
    const CVec Vb = Cbr * V;
    const CVec Vnorm = V.array() / V.cwiseAbs().array().cast<Complex>();
    BranchDerivs d;
    d.S = Vb.array() * I.conjugate().array();
    d.dVa = kJ * (I.conjugate().asDiagonal() * Cbr * V.asDiagonal() -
                  Vb.asDiagonal() * (Ybr * V.asDiagonal()).conjugate());
    d.dVm = Vb.asDiagonal() * (Ybr * Vnorm.asDiagonal()).conjugate() +
            I.conjugate().asDiagonal() * Cbr * Vnorm.asDiagonal();
    return d;
}

// Hessian of Σ mu_l |Sbr_l|².
Hess4 d2_abs_sbr_sq(const CMat& Cbr, const CMat& Ybr, const CVec& V, const Vec& mu) {
    const auto bd = branch_derivs(Cbr, Ybr, V);
    const CVec lam = bd.S.conjugate().array() * mu.cast<Complex>().array();
    const Hess4 s = d2_sbr(Cbr, Ybr, V, lam);
    const CMat M = mu.cast<Complex>().asDiagonal();
    Hess4 h;
    h.aa = 2.0 * (s.aa + bd.dVa.transpose() * M * bd.dVa.conjugate()).real().cast<Complex>();
    h.va = 2.0 * (s.va + bd.dVm.transpose() * M * bd.dVa.conjugate()).real().cast<Complex>();
    h.av = 2.0 * (s.av + bd.dVa.transpose() * M * bd.dVm.conjugate()).real().cast<Complex>();
    h.vv = 2.0 * (s.vv + bd.dVm.transpose() * M * bd.dVm.conjugate()).real().cast<Complex>();
    return h;
}

double inf_norm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

}  // namespace

double gen_cost(const Case& c, const Vec& Pg) {
    if (static_cast<std::size_t>(Pg.size()) != c.gen_count())
        throw std::invalid_argument("gen_cost: expected " + std::to_string(c.gen_count()) + " outputs, got " +
                                    std::to_string(Pg.size()));
    double total = 0.0;
    for (std::size_t g = 0; g < c.gen_count(); ++g) total += c.generators[g].cost(Pg(static_cast<Eigen::Index>(g)));
    return total;
}

const char* to_string(OpfStatus s) {
    switch (s) {
        case OpfStatus::Optimal: return "optimal";
        case OpfStatus::Infeasible: return "infeasible";
        case OpfStatus::IterLimit: return "iteration_limit";
    }
    return "unknown";
}

OpfNlp::OpfNlp(const Case& c) : base_(c.baseMVA) {
    nb_ = static_cast<Eigen::Index>(c.bus_count());
    ng_ = static_cast<Eigen::Index>(c.gen_count());
    ref_ = static_cast<Eigen::Index>(c.slack_index());
    for (Eigen::Index i = 0; i < nb_; ++i)
        if (i != ref_) nonref_.push_back(i);
    off_vm_ = nb_ - 1;
    off_pg_ = off_vm_ + nb_;
    off_qg_ = off_pg_ + ng_;
    nx_ = off_qg_ + ng_;

    ybus_ = build_ybus(c);
    Cg_ = CMat::Zero(nb_, ng_);
    c2_.resize(ng_);
    c1_.resize(ng_);
    c0_.resize(ng_);
    for (Eigen::Index g = 0; g < ng_; ++g) {
        const auto& gen = c.generators[static_cast<std::size_t>(g)];
        Cg_(static_cast<Eigen::Index>(c.bus_index(gen.bus)), g) = 1.0;
        c2_(g) = gen.cost.c2;
        c1_(g) = gen.cost.c1;
        c0_(g) = gen.cost.c0;
    }

    std::vector<std::size_t> limited;
    for (std::size_t l = 0; l < c.branches.size(); ++l)
        if (c.branches[l].has_limit()) limited.push_back(l);
    const auto nl = static_cast<Eigen::Index>(limited.size());
    Yf_ = CMat::Zero(nl, nb_);
    Yt_ = CMat::Zero(nl, nb_);
    Cf_ = CMat::Zero(nl, nb_);
    Ct_ = CMat::Zero(nl, nb_);
    flow_max_sq_.resize(nl);
    for (Eigen::Index r = 0; r < nl; ++r) {
        const auto& br = c.branches[limited[static_cast<std::size_t>(r)]];
        const auto f = static_cast<Eigen::Index>(c.bus_index(br.from));
        const auto t = static_cast<Eigen::Index>(c.bus_index(br.to));
        const auto y = branch_admittance(br);
        Yf_(r, f) = y.yff;
        Yf_(r, t) = y.yft;
        Yt_(r, f) = y.ytf;
        Yt_(r, t) = y.ytt;
        Cf_(r, f) = 1.0;
        Ct_(r, t) = 1.0;
        flow_max_sq_(r) = std::pow(br.S_max / base_, 2);
    }

    Sd_real_.resize(nb_);
    Sd_imag_.resize(nb_);
    for (Eigen::Index i = 0; i < nb_; ++i) {
        Sd_real_(i) = c.buses[static_cast<std::size_t>(i)].Pd / base_;
        Sd_imag_(i) = c.buses[static_cast<std::size_t>(i)].Qd / base_;
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    xmin_ = Vec::Constant(nx_, -inf);
    xmax_ = Vec::Constant(nx_, inf);
    for (Eigen::Index i = 0; i < nb_; ++i) {
        xmin_(off_vm_ + i) = c.buses[static_cast<std::size_t>(i)].Vmin;
        xmax_(off_vm_ + i) = c.buses[static_cast<std::size_t>(i)].Vmax;
    }
    for (Eigen::Index g = 0; g < ng_; ++g) {
        const auto& gen = c.generators[static_cast<std::size_t>(g)];
        xmin_(off_pg_ + g) = gen.Pmin / base_;
        xmax_(off_pg_ + g) = gen.Pmax / base_;
        xmin_(off_qg_ + g) = gen.Qmin / base_;
        xmax_(off_qg_ + g) = gen.Qmax / base_;
    }
    for (Eigen::Index k = 0; k < nx_; ++k) {
        if (xmin_(k) == xmax_(k)) {
            fixed_.push_back(k);
            continue;
        }
        if (std::isfinite(xmax_(k))) upper_.push_back(k);
        if (std::isfinite(xmin_(k))) lower_.push_back(k);
    }
}

Eigen::Index OpfNlp::neq() const { return 2 * nb_ + static_cast<Eigen::Index>(fixed_.size()); }

Eigen::Index OpfNlp::niq() const {
    return 2 * flow_max_sq_.size() + static_cast<Eigen::Index>(upper_.size() + lower_.size());
}

Vec OpfNlp::initial_point() const {
    Vec x = Vec::Zero(nx_);
    for (Eigen::Index k = off_vm_; k < nx_; ++k) {
        const bool lo = std::isfinite(xmin_(k)), hi = std::isfinite(xmax_(k));
        if (lo && hi) x(k) = 0.5 * (xmin_(k) + xmax_(k));
        else if (lo) x(k) = xmin_(k);
        else if (hi) x(k) = xmax_(k);
    }
    return x;
}

CVec OpfNlp::voltage(const Vec& x) const {
    CVec V(nb_);
    for (Eigen::Index i = 0; i < nb_; ++i) {
        const double va = i == ref_ ? 0.0 : x(i < ref_ ? i : i - 1);
        V(i) = std::polar(x(off_vm_ + i), va);
    }
    return V;
}

double OpfNlp::cost(const Vec& x) const {
    const Vec p = x.segment(off_pg_, ng_) * base_;
    return ((c2_.array() * p.array() + c1_.array()) * p.array() + c0_.array()).sum();
}

Vec OpfNlp::cost_gradient(const Vec& x) const {
    Vec df = Vec::Zero(nx_);
    const Vec p = x.segment(off_pg_, ng_) * base_;
    df.segment(off_pg_, ng_) = base_ * (2.0 * c2_.array() * p.array() + c1_.array());
    return df;
}

OpfNlp::Constraints OpfNlp::constraints(const Vec& x) const {
    const CVec V = voltage(x);
    const auto nva = nb_ - 1;
    Constraints out;

    // Power balance.
    const CVec Sg = Cg_ * (x.segment(off_pg_, ng_) + kJ * x.segment(off_qg_, ng_)).eval();
    const CVec mis = (V.array() * (ybus_ * V).conjugate().array()).matrix() - Sg;
    const auto nfix = static_cast<Eigen::Index>(fixed_.size());
    out.g.resize(2 * nb_ + nfix);
    out.g.head(nb_) = mis.real() + Sd_real_;
    out.g.segment(nb_, nb_) = mis.imag() + Sd_imag_;
    out.dg = Mat::Zero(nx_, 2 * nb_ + nfix);
    const auto sd = sbus_derivatives(ybus_, V);
    for (Eigen::Index k = 0; k < nva; ++k) {
        const auto i = nonref_[static_cast<std::size_t>(k)];
        out.dg.row(k).head(nb_) = sd.dVa.col(i).real().transpose();
        out.dg.row(k).segment(nb_, nb_) = sd.dVa.col(i).imag().transpose();
    }
    out.dg.block(off_vm_, 0, nb_, nb_) = sd.dVm.real().transpose();
    out.dg.block(off_vm_, nb_, nb_, nb_) = sd.dVm.imag().transpose();
    out.dg.block(off_pg_, 0, ng_, nb_) = -Cg_.real().transpose();
    out.dg.block(off_qg_, nb_, ng_, nb_) = -Cg_.real().transpose();
    for (Eigen::Index r = 0; r < nfix; ++r) {
        const auto k = fixed_[static_cast<std::size_t>(r)];
        out.g(2 * nb_ + r) = x(k) - xmin_(k);
        out.dg(k, 2 * nb_ + r) = 1.0;
    }

    // Squared branch flows at both ends, then box bounds.
    const auto nl = flow_max_sq_.size();
    const auto nup = static_cast<Eigen::Index>(upper_.size());
    const auto nlo = static_cast<Eigen::Index>(lower_.size());
    out.h.resize(2 * nl + nup + nlo);
    out.dh = Mat::Zero(nx_, 2 * nl + nup + nlo);
    Eigen::Index col = 0;
    for (const auto* pair : {&Cf_, &Ct_}) {
        const CMat& Cbr = *pair;
        const CMat& Ybr = pair == &Cf_ ? Yf_ : Yt_;
        if (nl == 0) break;
        const auto bd = branch_derivs(Cbr, Ybr, V);
        const Vec sr = bd.S.real(), si = bd.S.imag();
        out.h.segment(col, nl) = bd.S.cwiseAbs2() - flow_max_sq_;
        const Mat dVa = 2.0 * (sr.asDiagonal() * bd.dVa.real() + si.asDiagonal() * bd.dVa.imag());
        const Mat dVm = 2.0 * (sr.asDiagonal() * bd.dVm.real() + si.asDiagonal() * bd.dVm.imag());
        for (Eigen::Index k = 0; k < nva; ++k)
            out.dh.block(k, col, 1, nl) = dVa.col(nonref_[static_cast<std::size_t>(k)]).transpose();
        out.dh.block(off_vm_, col, nb_, nl) = dVm.transpose();
        col += nl;
    }
    for (Eigen::Index r = 0; r < nup; ++r, ++col) {
        const auto k = upper_[static_cast<std::size_t>(r)];
        out.h(col) = x(k) - xmax_(k);
        out.dh(k, col) = 1.0;
    }
    for (Eigen::Index r = 0; r < nlo; ++r, ++col) {
        const auto k = lower_[static_cast<std::size_t>(r)];
        out.h(col) = xmin_(k) - x(k);
        out.dh(k, col) = -1.0;
    }
    return out;
}

Mat OpfNlp::lagrangian_hessian(const Vec& x, const Vec& lam, const Vec& mu, double cost_mult) const {
    const CVec V = voltage(x);
    const Hess4 hp = d2_sbus(ybus_, V, lam.head(nb_).cast<Complex>());
    const Hess4 hq = d2_sbus(ybus_, V, lam.segment(nb_, nb_).cast<Complex>());
    Mat aa = hp.aa.real() + hq.aa.imag();
    Mat av = hp.av.real() + hq.av.imag();
    Mat va = hp.va.real() + hq.va.imag();
    Mat vv = hp.vv.real() + hq.vv.imag();
    const auto nl = flow_max_sq_.size();
    if (nl > 0) {
        for (int end = 0; end < 2; ++end) {
            const Hess4 hf = d2_abs_sbr_sq(end == 0 ? Cf_ : Ct_, end == 0 ? Yf_ : Yt_, V, mu.segment(end * nl, nl));
            aa += hf.aa.real();
            av += hf.av.real();
            va += hf.va.real();
            vv += hf.vv.real();
        }
    }

    Mat H = Mat::Zero(nx_, nx_);
    const auto nva = nb_ - 1;
    for (Eigen::Index r = 0; r < nva; ++r) {
        const auto i = nonref_[static_cast<std::size_t>(r)];
        for (Eigen::Index k = 0; k < nva; ++k) H(r, k) = aa(i, nonref_[static_cast<std::size_t>(k)]);
        H.block(r, off_vm_, 1, nb_) = av.row(i);
        H.block(off_vm_, r, nb_, 1) = va.col(i);
    }
    H.block(off_vm_, off_vm_, nb_, nb_) = vv;
    H.diagonal().segment(off_pg_, ng_) = cost_mult * 2.0 * c2_ * base_ * base_;
    return H;
}

OpfSolution solve_opf(const Case& c, const OpfOptions& opt) {
    if (const auto v = validate_case(c); !v.empty()) throw CaseError("invalid case: " + v.front());
    const OpfNlp nlp(c);
    const auto nx = nlp.nx();
    const auto neq = nlp.neq();
    const auto niq = nlp.niq();

    Vec x = nlp.initial_point();
    double f = nlp.cost(x) * opt.cost_mult;
    Vec df = nlp.cost_gradient(x) * opt.cost_mult;
    auto con = nlp.constraints(x);

    double gamma = 1.0;
    Vec lam = Vec::Zero(neq);
    Vec z = Vec::Constant(niq, opt.z0);
    for (Eigen::Index k = 0; k < niq; ++k)
        if (con.h(k) < -opt.z0) z(k) = -con.h(k);
    Vec mu = z;
    for (Eigen::Index k = 0; k < niq; ++k)
        if (gamma / z(k) > opt.z0) mu(k) = gamma / z(k);

    OpfSolution sol;
    double f0 = f;
    Vec Lx = df + con.dg * lam + con.dh * mu;
    auto measure = [&](double prev_f) {
        OpfResiduals r;
        const double maxh = niq ? con.h.maxCoeff() : 0.0;
        r.feasibility = std::max(inf_norm(con.g), maxh) / (1.0 + std::max(inf_norm(x), inf_norm(z)));
        r.gradient = inf_norm(Lx) / (1.0 + std::max(inf_norm(lam), inf_norm(mu)));
        r.complementarity = z.dot(mu) / (1.0 + inf_norm(x));
        r.cost = std::abs(f - prev_f) / (1.0 + std::abs(prev_f));
        return r;
    };
    auto converged = [&](const OpfResiduals& r) {
        return r.feasibility < opt.feasibility_tol && r.gradient < opt.gradient_tol &&
               r.complementarity < opt.complementarity_tol && r.cost < opt.cost_tol;
    };

    sol.residuals = measure(f0);
    bool done = converged(sol.residuals);
    bool failed = false;
    const Vec e = Vec::Ones(niq);
    Mat K(nx + neq, nx + neq);
    Vec rhs(nx + neq);

    while (!done && sol.iterations < opt.max_iterations) {
        ++sol.iterations;
        const Mat Lxx = nlp.lagrangian_hessian(x, lam, mu, opt.cost_mult);
        const Vec zinv = z.cwiseInverse();
        const Mat dh_zinv = con.dh * zinv.asDiagonal();
        K.setZero();
        K.topLeftCorner(nx, nx) = Lxx + dh_zinv * mu.asDiagonal() * con.dh.transpose();
        K.topRightCorner(nx, neq) = con.dg;
        K.bottomLeftCorner(neq, nx) = con.dg.transpose();
        rhs.head(nx) = -(Lx + dh_zinv * (mu.cwiseProduct(con.h) + gamma * e));
        rhs.tail(neq) = -con.g;
        const Vec d = Eigen::PartialPivLU<Mat>(K).solve(rhs);
        if (!d.allFinite()) {
            failed = true;
            sol.message = "singular Newton system";
            break;
        }
        const Vec dx = d.head(nx);
        const Vec dlam = d.tail(neq);
        const Vec dz = -con.h - z - con.dh.transpose() * dx;
        const Vec dmu = -mu + zinv.cwiseProduct(gamma * e - mu.cwiseProduct(dz));

        double alphap = 1.0, alphad = 1.0;
        for (Eigen::Index k = 0; k < niq; ++k) {
            if (dz(k) < 0.0) alphap = std::min(alphap, opt.step_fraction * z(k) / -dz(k));
            if (dmu(k) < 0.0) alphad = std::min(alphad, opt.step_fraction * mu(k) / -dmu(k));
        }
        x += alphap * dx;
        z += alphap * dz;
        lam += alphad * dlam;
        mu += alphad * dmu;
        if (niq > 0) gamma = opt.centering * z.dot(mu) / static_cast<double>(niq);

        f = nlp.cost(x) * opt.cost_mult;
        df = nlp.cost_gradient(x) * opt.cost_mult;
        con = nlp.constraints(x);
        Lx = df + con.dg * lam + con.dh * mu;
        sol.residuals = measure(f0);
        if (converged(sol.residuals)) {
            done = true;
            break;
        }
        const double eps = std::numeric_limits<double>::epsilon();
        if (!x.allFinite() || alphap < opt.min_step || alphad < opt.min_step || gamma < eps || gamma > 1.0 / eps) {
            failed = true;
            sol.message = "numerically failed";
            break;
        }
        f0 = f;
    }

    const CVec V = nlp.voltage(x);
    const auto ng = static_cast<Eigen::Index>(c.gen_count());
    sol.V_opt = V;
    sol.Pg_opt = x.segment(nlp.pg_offset(), ng) * c.baseMVA;
    sol.Qg_opt = x.segment(nlp.qg_offset(), ng) * c.baseMVA;
    sol.Vg_opt.resize(ng);
    for (Eigen::Index g = 0; g < ng; ++g)
        sol.Vg_opt(g) = std::abs(V(static_cast<Eigen::Index>(c.bus_index(c.generators[static_cast<std::size_t>(g)].bus))));
    sol.objective = gen_cost(c, sol.Pg_opt);
    if (done) {
        sol.status = OpfStatus::Optimal;
        sol.message = "converged";
    } else if (failed || sol.residuals.feasibility > opt.feasibility_tol) {
        sol.status = OpfStatus::Infeasible;
        if (sol.message.empty()) sol.message = "iteration limit with infeasible iterate";
    } else {
        sol.status = OpfStatus::IterLimit;
        sol.message = "iteration limit";
    }
    return sol;
}

}  // namespace gridppo
