#pragma once

#include <string>
#include <vector>

#include "gridppo/case.hpp"

namespace gridppo {

struct PfOptions {
    double tolerance = 1e-8;  // max-norm power mismatch, p.u.
    int max_iterations = 20;  // Newton iterations per Q-limit pass
    int max_q_passes = 6;
    bool enforce_q_limits = true;
    double q_limit_tolerance = 1e-8;  // MVAr
};

struct PfSolution {
    CVec V;
    Vec Pg;  // MW per generator
    Vec Qg;  // MVAr per generator
    Vec Sf;  // MVA per branch, from end (0 when out of service)
    Vec St;  // MVA per branch, to end
    int iterations = 0;  // Newton iterations summed over all passes
    int q_passes = 0;
    bool converged = false;
    double max_mismatch = 0.0;
    std::vector<std::size_t> q_limited;  // generators pinned at a reactive limit
    std::string message;
};

struct SbusDerivatives {
    CMat dVa;  // dS/dVa
    CMat dVm;  // dS/d|V|
};

/// Partial derivatives of the complex bus injections S = diag(V) conj(Y V)
/// with respect to voltage angles and magnitudes (polar form).
SbusDerivatives sbus_derivatives(const CMat& ybus, const CVec& V);

/// Newton-Raphson solver bound to one network topology. The admittance
/// matrix is built once; `solve` may then be called with cases that differ
/// only in loads and generator setpoints.
class PowerFlowSolver {
public:
    explicit PowerFlowSolver(const Case& topology, PfOptions options = {});

    PfSolution solve(const Case& c);
    PfSolution solve(const Case& c, const CVec& warm_start);

    const CMat& ybus() const { return ybus_; }
    const PfOptions& options() const { return options_; }

private:
    PfSolution run(const Case& c, CVec V);

    PfOptions options_;
    CMat ybus_;
    std::vector<BranchAdmittance> branch_y_;
    Mat jacobian_;
};

PfSolution solve_pf(const Case& c, const PfOptions& options = {});

/// Injected minus scheduled power, p.u.: P at PV and PQ buses (PV first, each
/// group in bus order) followed by Q at PQ buses.
Vec compute_mismatch(const Case& c, const CVec& V);

/// Jacobian of compute_mismatch with respect to [angles at PV+PQ buses,
/// magnitudes at PQ buses], same orderings.
Mat compute_jacobian(const Case& c, const CVec& V);

struct BranchFlows {
    CVec Sf;  // complex MVA at the from end
    CVec St;
    Vec Sf_abs() const { return Sf.cwiseAbs(); }
    Vec St_abs() const { return St.cwiseAbs(); }
};
BranchFlows branch_flows(const Case& c, const CVec& V);

enum class BranchEnd { From, To };

struct Excess {
    std::size_t index;
    double amount;
};

struct BranchExcess {
    std::size_t index;
    BranchEnd end;
    double amount;  // MVA above S_max
};

struct ViolationReport {
    std::vector<Excess> pgen;  // MW outside [Pmin, Pmax]
    std::vector<Excess> vbus;  // p.u. outside [Vmin, Vmax]
    std::vector<BranchExcess> branch;

    bool empty() const { return pgen.empty() && vbus.empty() && branch.empty(); }
    double pgen_total() const;
    double vbus_total() const;
    double branch_total() const;
};

/// Limit excesses of a converged solution. Only excesses strictly above
/// `tolerance` are reported; the reported amount is the full excess.
ViolationReport check_violations(const Case& c, const PfSolution& sol, double tolerance = 0.0);

}  // namespace gridppo
