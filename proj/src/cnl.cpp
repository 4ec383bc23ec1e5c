#include "sieve/cnl.hpp"

#include <algorithm>
#include <cmath>

namespace sieve {

namespace {

// Logits rho * (ln beta_l + vc_l); excluded children (beta = 0) get -inf.
std::vector<double> nest_logits(const NodeParams& node, const std::vector<double>& child_v,
                                double rho) {
    std::vector<double> a(child_v.size(), kNegInf);
    for (size_t l = 0; l < child_v.size(); ++l) {
        if (node.beta[l] > 0.0) a[l] = rho * (std::log(node.beta[l]) + child_v[l]);
    }
    return a;
}

int argmax_lowest(const std::vector<double>& a) {
    int best = 0;
    for (size_t l = 1; l < a.size(); ++l) {
        if (a[l] > a[best]) best = static_cast<int>(l);
    }
    return best;
}

}  // namespace

double cnl_node_value(const NodeParams& node, const std::vector<double>& child_v) {
    require(node.beta.size() == child_v.size(), "cnl: child dimension mismatch");
    if (node.rho >= kRhoMaxBranch) {
        double m = kNegInf;
        for (size_t l = 0; l < child_v.size(); ++l) {
            if (node.beta[l] > 0.0) m = std::max(m, std::log(node.beta[l]) + child_v[l]);
        }
        return m;
    }
    const auto a = nest_logits(node, child_v, node.rho);
    return log_sum_exp(a) / node.rho;
}

std::vector<double> cnl_node_transitions(const NodeParams& node,
                                         const std::vector<double>& child_v) {
    require(node.beta.size() == child_v.size(), "cnl: child dimension mismatch");
    std::vector<double> t(child_v.size(), 0.0);
    if (node.rho >= kRhoMaxBranch) {
        std::vector<double> a(child_v.size(), kNegInf);
        for (size_t l = 0; l < child_v.size(); ++l) {
            if (node.beta[l] > 0.0) a[l] = std::log(node.beta[l]) + child_v[l];
        }
        t[argmax_lowest(a)] = 1.0;
        return t;
    }
    const auto a = nest_logits(node, child_v, node.rho);
    const double lse = log_sum_exp(a);
    for (size_t l = 0; l < t.size(); ++l) {
        if (a[l] != kNegInf) t[l] = std::exp(a[l] - lse);
    }
    return t;
}

std::vector<std::vector<double>> inclusive_values(const NetworkSpec& net,
                                                  const std::vector<double>& U) {
    require(net.kind == NetKind::choice, "inclusive_values: choice network expected");
    const int S = net.depth();
    require(static_cast<int>(U.size()) == net.widths[S], "inclusive_values: |U| != K_S");
    for (double u : U) require(std::isfinite(u), "inclusive_values: non-finite utility");

    std::vector<std::vector<double>> v(S + 1);
    v[S] = U;
    for (int s = S - 1; s >= 0; --s) {
        v[s].resize(net.widths[s]);
        for (int k = 0; k < net.widths[s]; ++k) {
            v[s][k] = cnl_node_value(net.nodes[s][k], v[s + 1]);
        }
    }
    return v;
}

std::vector<std::vector<double>> reach_probabilities(
    const NetworkSpec& net, const std::vector<std::vector<double>>& v) {
    const int S = net.depth();
    std::vector<std::vector<double>> pi(S + 1);
    pi[0] = {1.0};
    for (int s = 0; s < S; ++s) {
        pi[s + 1].assign(net.widths[s + 1], 0.0);
        for (int k = 0; k < net.widths[s]; ++k) {
            const auto t = cnl_node_transitions(net.nodes[s][k], v[s + 1]);
            for (int l = 0; l < net.widths[s + 1]; ++l) {
                pi[s + 1][l] += t[l] * pi[s][k];
            }
        }
    }
    return pi;
}

ChoiceStates choice_states(const NetworkSpec& net, const std::vector<double>& U) {
    ChoiceStates st;
    st.v = inclusive_values(net, U);
    st.pi = reach_probabilities(net, st.v);
    return st;
}

double eval_generating(const NetworkSpec& net, const std::vector<double>& w) {
    for (double x : w) require(x > 0.0, "eval_generating: nonpositive argument");
    std::vector<double> lw(w.size());
    for (size_t m = 0; m < w.size(); ++m) lw[m] = std::log(w[m]);
    const auto v = inclusive_values(net, lw);
    return std::exp(v[0][0]);
}

std::vector<double> ccp(const NetworkSpec& net, const std::vector<double>& U) {
    const auto st = choice_states(net, U);
    return st.pi.back();
}

std::vector<double> ccp_direct(const std::function<double(const std::vector<double>&)>& F,
                               const std::vector<double>& U, double tau, DiffMode mode) {
    require(tau > 0.0, "ccp_direct: tau must be positive");
    std::vector<double> w(U.size());
    for (size_t m = 0; m < U.size(); ++m) w[m] = std::exp(U[m]);
    const double f0 = F(w);
    require(f0 > 0.0, "ccp_direct: generating function nonpositive at evaluation point");

    std::vector<double> mu(U.size());
    for (size_t m = 0; m < U.size(); ++m) {
        const double h = 1e-6 * w[m];
        std::vector<double> wp = w;
        double deriv;
        if (mode == DiffMode::central) {
            wp[m] = w[m] + h;
            const double fp = F(wp);
            wp[m] = w[m] - h;
            const double fm = F(wp);
            deriv = (fp - fm) / (2.0 * h);
        } else {
            wp[m] = w[m] + h;
            deriv = (F(wp) - f0) / h;
        }
        mu[m] = w[m] * deriv / (tau * f0);
    }
    return mu;
}

double marginal_adapter_eval(const std::vector<double>& coeffs, double w) {
    require(!coeffs.empty(), "marginal_adapter_eval: empty coefficient list");
    double acc = 0.0;
    double wp = w;
    for (double c : coeffs) {
        acc += c * wp;
        wp *= w;
    }
    return std::max(acc, kProbFloor);
}

}  // namespace sieve
