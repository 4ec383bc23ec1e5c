#ifndef SIEVE_CES_HPP
#define SIEVE_CES_HPP

#include <vector>

#include "sieve/numeric.hpp"

namespace sieve {

// Parameters of one CES technology
//   F(w) = [ (beta0*1)^rho + sum_l (beta_l w_l)^rho ]^(tau/rho)
// with the non-discretionary input fixed at 1. rho <= 1 keeps the function
// concave; rho = -inf is the Leontief limit, rho -> 0 the Cobb-Douglas limit,
// rho = 1 perfect substitutes. Entries with beta_l = 0 mean "input not used"
// and are excluded from sums and minima rather than contributing 0^rho.
struct CesParams {
    std::vector<double> beta;
    double beta0 = 0.0;
    double rho = 1.0;
    double tau = 1.0;
};

enum class CesBranch { linear, cobb_douglas, leontief, general };

CesBranch ces_branch(double rho);

void check_ces_params(const CesParams& p);

// Output quantity produced from input quantities w (all >= 0).
double eval_ces(const std::vector<double>& w, const CesParams& p);

// Minimal expenditure pi0 + sum_l pi_l w_l over w with F(w) = v, for strictly
// positive input prices pi. Throws FeasibilityError when v exceeds the
// capacity bound beta0^tau of a complements-type (rho < 0) technology.
double ces_cost(const std::vector<double>& pi, double pi0, double v, const CesParams& p);

// Marginal cost dC/dv at output v.
double price_activation(const std::vector<double>& pi, double v, const CesParams& p);

// Cost-minimizing input demand for a single node producing v at prices pi.
// For rho = 1 all demand goes to the input with the lowest pi_l/beta_l
// (lowest index on ties).
std::vector<double> node_demand(const std::vector<double>& pi, double v, const CesParams& p);

// Implied first-layer prices from the numeraire first-order condition at node
// 1: pi_k = (beta_1k/beta_11)^rho (alloc_k/alloc_1)^(rho-1), pi_1 = 1.
// alloc is the allocation of each input to node 1; every entry must be
// strictly positive (interior solution).
std::vector<double> infer_input_prices(const std::vector<double>& alloc, const CesParams& node1);

// ---------------------------------------------------------------------------
// Analytic partial derivatives of the activation maps, consumed by the
// equilibrium Jacobians. Layout: K = p.beta.size(); flattened K x K blocks are
// row-major with [j*K + i] = d(out_j)/d(in_i).

struct DemandPartials {
    std::vector<double> d;        // demand per input
    std::vector<double> dd_dpi;   // K x K: d d_j / d pi_i
    std::vector<double> dd_dv;    // d d_j / d v
    std::vector<double> dd_dbeta; // K x K: d d_j / d beta_i
    std::vector<double> dd_dbeta0;
    std::vector<double> dd_drho;
    std::vector<double> dd_dtau;
};

struct PricePartials {
    double phi = 0.0;             // marginal cost
    std::vector<double> dphi_dpi;
    double dphi_dv = 0.0;
    std::vector<double> dphi_dbeta;
    double dphi_dbeta0 = 0.0;
    double dphi_drho = 0.0;
    double dphi_dtau = 0.0;
};

DemandPartials demand_partials(const std::vector<double>& pi, double v, const CesParams& p);
PricePartials price_partials(const std::vector<double>& pi, double v, const CesParams& p);

}  // namespace sieve

#endif
