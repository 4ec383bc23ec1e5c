#ifndef SIEVE_CNL_HPP
#define SIEVE_CNL_HPP

#include <functional>
#include <vector>

#include "sieve/network.hpp"

namespace sieve {

// Inclusive values (log scale) and reach probabilities per node, [layer][node].
struct ChoiceStates {
    std::vector<std::vector<double>> v;
    std::vector<std::vector<double>> pi;
};

// Log of one nest's generating function given child log-values:
// (1/rho) log sum_l (beta_l e^{vc_l})^rho, computed as a shifted log-sum-exp.
// rho >= kRhoMaxBranch takes the max limit (lowest index on ties).
double cnl_node_value(const NodeParams& node, const std::vector<double>& child_v);

// Transition shares from a nest to its children,
//   t_l = (beta_l e^{vc_l})^rho / sum_m (beta_m e^{vc_m})^rho.
std::vector<double> cnl_node_transitions(const NodeParams& node,
                                         const std::vector<double>& child_v);

// Generating function F_K^S(w) of the whole network, w strictly positive.
double eval_generating(const NetworkSpec& net, const std::vector<double>& w);

// Leaf-to-root inclusive-value pass; leaves carry v = U.
std::vector<std::vector<double>> inclusive_values(const NetworkSpec& net,
                                                  const std::vector<double>& U);

// Root-to-leaf reach-probability pass on top of inclusive values.
std::vector<std::vector<double>> reach_probabilities(
    const NetworkSpec& net, const std::vector<std::vector<double>>& v);

ChoiceStates choice_states(const NetworkSpec& net, const std::vector<double>& U);

// Conditional choice probabilities over the leaf alternatives.
std::vector<double> ccp(const NetworkSpec& net, const std::vector<double>& U);

enum class DiffMode { central, right };

// McFadden-form probabilities mu_m = e^{U_m} dF/dw_m / (tau F) at w = e^U,
// with numerically differentiated partials (step 1e-6 * w_m; right
// differences at kinks).
std::vector<double> ccp_direct(const std::function<double(const std::vector<double>&)>& F,
                               const std::vector<double>& U, double tau,
                               DiffMode mode = DiffMode::central);

// Polynomial marginal adapter chi(w) = sum_l coeffs[l-1] w^l, clamped below.
double marginal_adapter_eval(const std::vector<double>& coeffs, double w);

}  // namespace sieve

#endif
