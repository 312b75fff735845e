#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gridppo/linalg.hpp"

namespace gridppo {

// Numeric codes follow the MATPOWER bus table.
enum class BusKind { PQ = 1, PV = 2, Slack = 3 };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double Pd = 0.0;  // MW
    double Qd = 0.0;  // MVAr
    double Gs = 0.0;  // MW at 1 p.u.
    double Bs = 0.0;  // MVAr at 1 p.u.
    int area = 1;
    double Vm = 1.0;  // stored solution/initial guess, p.u.
    double Va = 0.0;  // degrees
    double base_kV = 0.0;
    int zone = 1;
    double Vmax = 1.1;
    double Vmin = 0.9;
};

struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;
    double S_max = 0.0;  // MVA; 0 means unlimited
    double rate_b = 0.0;
    double rate_c = 0.0;
    double tap = 0.0;  // 0 means nominal (1.0)
    double shift = 0.0;  // degrees
    bool in_service = true;
    double angle_min = -360.0;
    double angle_max = 360.0;

    bool has_limit() const { return in_service && S_max > 0.0; }
    double tap_ratio() const { return tap == 0.0 ? 1.0 : tap; }
};

// Polynomial cost c2*P^2 + c1*P + c0 with P in MW, result in $/h.
struct PolyCost {
    double c2 = 0.0;
    double c1 = 0.0;
    double c0 = 0.0;
    double startup = 0.0;
    double shutdown = 0.0;

    double operator()(double p) const { return (c2 * p + c1) * p + c0; }
};

struct Generator {
    int bus = 0;
    double Pg = 0.0;  // MW
    double Qg = 0.0;  // MVAr
    double Qmax = 0.0;
    double Qmin = 0.0;
    double Vg = 1.0;  // p.u.
    double mBase = 100.0;
    double Pmax = 0.0;
    double Pmin = 0.0;
    PolyCost cost;
};

struct Case {
    double baseMVA = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;

    std::size_t bus_count() const { return buses.size(); }
    std::size_t gen_count() const { return generators.size(); }

    // Position of the bus with external label `id`, if any.
    std::optional<std::size_t> find_bus(int id) const;
    std::size_t bus_index(int id) const;
    std::size_t slack_index() const;
};

class CaseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CaseParseError : public CaseError {
public:
    CaseParseError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Parses a case in either the tabular text format (MATPOWER `mpc` tables or
/// bare `bus`/`gen`/`branch`/`gencost`/`baseMVA` headers) or its JSON mirror.
/// The result is validated; any violation raises CaseError.
Case parse_case(std::string_view text);
Case load_case(const std::string& path);

/// Tabular text form; numbers are written in shortest round-trip notation.
std::string serialize_case(const Case& c);
std::string serialize_case_json(const Case& c);

// Hex CRC-32 of the canonical serialization.
std::string case_fingerprint(const Case& c);

/// Every invariant breach, in a stable order. Empty means valid.
std::vector<std::string> validate_case(const Case& c);

/// Complex admittance matrix (p.u.) over in-service branches and bus shunts.
CMat build_ybus(const Case& c);

// Terminal admittances of one branch: [I_f; I_t] = [yff yft; ytf ytt] [V_f; V_t].
struct BranchAdmittance {
    Complex yff, yft, ytf, ytt;
};
BranchAdmittance branch_admittance(const Branch& br);

/// Copy of `c` with the (from, to) branch limit replaced. Matches either
/// orientation; every parallel circuit between the two buses is updated.
Case override_branch_limit(const Case& c, int from, int to, double s_max);

}  // namespace gridppo
