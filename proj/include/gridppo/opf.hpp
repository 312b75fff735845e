#pragma once

#include <string>

#include "gridppo/case.hpp"

namespace gridppo {

/// Total generation cost in $/h for active outputs `Pg` (MW, one per generator).
double gen_cost(const Case& c, const Vec& Pg);

enum class OpfStatus { Optimal, Infeasible, IterLimit };
const char* to_string(OpfStatus s);

struct OpfOptions {
    double feasibility_tol = 1e-6;
    double gradient_tol = 1e-6;
    double complementarity_tol = 1e-6;
    double cost_tol = 1e-6;
    int max_iterations = 150;
    double centering = 0.1;           // sigma
    double step_fraction = 0.9995;    // fraction-to-boundary
    double cost_mult = 1e-4;          // objective scaling inside the NLP
    double min_step = 1e-8;
    double z0 = 1.0;
};

struct OpfResiduals {
    double feasibility = 0.0;
    double gradient = 0.0;
    double complementarity = 0.0;
    double cost = 0.0;
};

struct OpfSolution {
    Vec Pg_opt;  // MW
    Vec Qg_opt;  // MVAr
    Vec Vg_opt;  // p.u., magnitude at each generator's bus
    CVec V_opt;
    double objective = 0.0;  // $/h
    OpfStatus status = OpfStatus::Infeasible;
    int iterations = 0;
    OpfResiduals residuals;
    std::string message;
};

/// The AC OPF as a smooth NLP in x = [Va (non-reference buses), Vm, Pg, Qg],
/// all in p.u. and radians:
///   min f(x)  s.t.  g(x) = 0 (bus power balance, real parts then imaginary),
///                   h(x) <= 0 (squared branch flows, then box bounds).
/// Jacobians are stored column-per-constraint (nx × n).
class OpfNlp {
public:
    explicit OpfNlp(const Case& c);

    Eigen::Index nx() const { return nx_; }
    Eigen::Index neq() const;
    Eigen::Index niq() const;

    Vec initial_point() const;
    CVec voltage(const Vec& x) const;

    double cost(const Vec& x) const;  // $/h
    Vec cost_gradient(const Vec& x) const;

    struct Constraints {
        Vec g, h;
        Mat dg, dh;
    };
    Constraints constraints(const Vec& x) const;

    /// Hessian of cost_mult·f + lamᵀg + muᵀh.
    Mat lagrangian_hessian(const Vec& x, const Vec& lam, const Vec& mu, double cost_mult) const;

    Eigen::Index pg_offset() const { return off_pg_; }
    Eigen::Index qg_offset() const { return off_qg_; }
    Eigen::Index vm_offset() const { return off_vm_; }

private:
    double base_;
    Vec c2_, c1_, c0_;
    Eigen::Index nb_, ng_, nx_, off_vm_, off_pg_, off_qg_;
    Eigen::Index ref_;
    std::vector<Eigen::Index> nonref_;
    CMat ybus_;
    CMat Cg_;              // nb × ng incidence
    CMat Yf_, Yt_, Cf_, Ct_;  // rows of limited branches
    Vec flow_max_sq_;
    Vec Sd_real_, Sd_imag_;
    Vec xmin_, xmax_;
    std::vector<Eigen::Index> upper_, lower_, fixed_;  // bounded variable indices
};

/// Primal-dual interior-point solve of the AC OPF, started from the box
/// midpoints with zero angles.
OpfSolution solve_opf(const Case& c, const OpfOptions& options = {});

}  // namespace gridppo
