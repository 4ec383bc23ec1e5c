#include "sieve/ces.hpp"

#include <algorithm>
#include <cmath>

namespace sieve {

namespace {

// Indices of inputs the node actually uses.
std::vector<int> included(const CesParams& p) {
    std::vector<int> idx;
    for (int l = 0; l < static_cast<int>(p.beta.size()); ++l) {
        if (p.beta[l] > 0.0) idx.push_back(l);
    }
    return idx;
}

void check_prices(const std::vector<double>& pi, const CesParams& p) {
    require(pi.size() == p.beta.size(), "ces: price dimension mismatch");
    for (size_t l = 0; l < pi.size(); ++l) {
        if (p.beta[l] > 0.0) require(pi[l] > 0.0, "ces: nonpositive price");
    }
}

// Discretionary requirement E = v^(rho/tau) - beta0^rho in log space.
// Returns {lnE, feasible}. For rho > 0, v below the free floor beta0^tau,
// E is clamped to 0 (lnE = -inf). For rho < 0, v at or above the capacity
// beta0^tau is infeasible.
struct LogE {
    double ln_e;
    double ln_a;  // ln v^(rho/tau)
    bool clamped;
};

LogE log_requirement(double v, const CesParams& p) {
    const double rho = p.rho, tau = p.tau;
    const double a = (rho / tau) * std::log(v);
    if (p.beta0 <= 0.0) return {a, a, false};
    const double b = rho * std::log(p.beta0);
    if (rho > 0.0) {
        if (a <= b) return {kNegInf, a, true};
        return {a + std::log1p(-std::exp(b - a)), a, false};
    }
    // rho < 0: capacity bound v < beta0^tau
    if (a <= b) {
        throw FeasibilityError("ces_cost: target exceeds capacity beta0^tau");
    }
    return {a + std::log1p(-std::exp(b - a)), a, false};
}

// Dual price aggregate ln S = ln sum_l (pi_l/beta_l)^(rho/(rho-1)) and the
// cost shares sigma_l = term_l / S.
struct PriceIndex {
    double ln_s;
    std::vector<double> sigma;  // full length, zero on excluded inputs
};

PriceIndex price_index(const std::vector<double>& pi, const CesParams& p,
                       const std::vector<int>& idx) {
    const double e = p.rho / (p.rho - 1.0);
    std::vector<double> t;
    t.reserve(idx.size());
    for (int l : idx) t.push_back(e * (std::log(pi[l]) - std::log(p.beta[l])));
    PriceIndex out;
    out.ln_s = log_sum_exp(t);
    out.sigma.assign(pi.size(), 0.0);
    for (size_t i = 0; i < idx.size(); ++i) out.sigma[idx[i]] = std::exp(t[i] - out.ln_s);
    return out;
}

int argmin_unit_price(const std::vector<double>& pi, const CesParams& p,
                      const std::vector<int>& idx) {
    int best = idx[0];
    double best_v = pi[best] / p.beta[best];
    for (int l : idx) {
        double u = pi[l] / p.beta[l];
        if (u < best_v) {
            best_v = u;
            best = l;
        }
    }
    return best;
}

}  // namespace

CesBranch ces_branch(double rho) {
    if (std::fabs(rho - 1.0) < kRhoLinearEps) return CesBranch::linear;
    if (std::fabs(rho) < kRhoCobbEps) return CesBranch::cobb_douglas;
    if (rho < kRhoLeontief) return CesBranch::leontief;
    return CesBranch::general;
}

void check_ces_params(const CesParams& p) {
    require(!p.beta.empty(), "ces: empty share vector");
    bool any_pos = p.beta0 > 0.0;
    for (double b : p.beta) {
        require(b >= 0.0 && std::isfinite(b), "ces: negative share weight");
        any_pos = any_pos || b > 0.0;
    }
    require(any_pos, "ces: all share weights zero");
    require(p.beta0 >= 0.0, "ces: negative beta0");
    require(p.rho <= 1.0 + kRhoLinearEps, "ces: rho above convexity bound 1");
    require(p.tau > 0.0 && std::isfinite(p.tau), "ces: tau must be positive");
}

double eval_ces(const std::vector<double>& w, const CesParams& p) {
    check_ces_params(p);
    require(w.size() == p.beta.size(), "eval_ces: dimension mismatch");
    for (double x : w) require(x >= 0.0, "eval_ces: negative input");

    const auto idx = included(p);
    const double rho = p.rho, tau = p.tau;

    switch (ces_branch(rho)) {
        case CesBranch::linear: {
            double s = p.beta0;
            for (int l : idx) s += p.beta[l] * w[l];
            return std::pow(s, tau);
        }
        case CesBranch::leontief: {
            double m = p.beta0 > 0.0 ? p.beta0 : kPosInf;
            for (int l : idx) m = std::min(m, p.beta[l] * w[l]);
            if (m == kPosInf) return 0.0;
            return std::pow(m, tau);
        }
        case CesBranch::cobb_douglas: {
            if (idx.empty()) return std::pow(p.beta0, tau);
            double n = static_cast<double>(idx.size()) + (p.beta0 > 0.0 ? 1.0 : 0.0);
            double ln_prod = p.beta0 > 0.0 ? std::log(p.beta0) : 0.0;
            for (int l : idx) {
                if (w[l] <= 0.0) return 0.0;
                ln_prod += std::log(p.beta[l] * w[l]);
            }
            return std::exp((tau / n) * ln_prod);
        }
        case CesBranch::general:
        default: {
            std::vector<double> terms;
            terms.reserve(idx.size() + 1);
            if (p.beta0 > 0.0) terms.push_back(rho * std::log(p.beta0));
            for (int l : idx) {
                if (w[l] <= 0.0) {
                    if (rho < 0.0) return 0.0;  // complements: a missing input stalls the node
                    continue;
                }
                terms.push_back(rho * std::log(p.beta[l] * w[l]));
            }
            if (terms.empty()) return 0.0;
            return std::exp((tau / rho) * log_sum_exp(terms));
        }
    }
}

double ces_cost(const std::vector<double>& pi, double pi0, double v, const CesParams& p) {
    check_ces_params(p);
    check_prices(pi, p);
    require(v > 0.0, "ces_cost: target must be positive");

    const auto idx = included(p);
    require(!idx.empty(), "ces_cost: node uses no discretionary input");
    const double rho = p.rho, tau = p.tau;

    switch (ces_branch(rho)) {
        case CesBranch::linear: {
            double e = std::pow(v, 1.0 / tau) - p.beta0;
            if (e <= 0.0) return pi0;
            int j = argmin_unit_price(pi, p, idx);
            return pi0 + (pi[j] / p.beta[j]) * e;
        }
        case CesBranch::leontief: {
            if (p.beta0 > 0.0 && v > std::pow(p.beta0, tau)) {
                throw FeasibilityError("ces_cost: target exceeds capacity beta0^tau");
            }
            double r = 0.0;
            for (int l : idx) r += pi[l] / p.beta[l];
            return pi0 + std::pow(v, 1.0 / tau) * r;
        }
        case CesBranch::cobb_douglas: {
            const double kp = static_cast<double>(idx.size());
            const double n = kp + (p.beta0 > 0.0 ? 1.0 : 0.0);
            double ln_c = (n / tau) * std::log(v);
            if (p.beta0 > 0.0) ln_c -= std::log(p.beta0);
            for (int l : idx) ln_c += std::log(pi[l]) - std::log(p.beta[l]);
            ln_c /= kp;
            return pi0 + kp * std::exp(ln_c);
        }
        case CesBranch::general:
        default: {
            const LogE e = log_requirement(v, p);
            if (e.clamped) return pi0;
            const PriceIndex px = price_index(pi, p, idx);
            const double ln_p = ((rho - 1.0) / rho) * px.ln_s;
            return pi0 + std::exp(ln_p + e.ln_e / rho);
        }
    }
}

double price_activation(const std::vector<double>& pi, double v, const CesParams& p) {
    check_ces_params(p);
    check_prices(pi, p);
    require(v > 0.0, "price_activation: target must be positive");

    const auto idx = included(p);
    require(!idx.empty(), "price_activation: node uses no discretionary input");
    const double rho = p.rho, tau = p.tau;

    switch (ces_branch(rho)) {
        case CesBranch::linear: {
            double e = std::pow(v, 1.0 / tau) - p.beta0;
            if (e < 0.0) return 0.0;  // below the free floor; right-derivative at it
            int j = argmin_unit_price(pi, p, idx);
            return (pi[j] / p.beta[j]) * (1.0 / tau) * std::pow(v, 1.0 / tau - 1.0);
        }
        case CesBranch::leontief: {
            if (p.beta0 > 0.0 && v > std::pow(p.beta0, tau)) {
                throw FeasibilityError("price_activation: target exceeds capacity");
            }
            double r = 0.0;
            for (int l : idx) r += pi[l] / p.beta[l];
            return r * (1.0 / tau) * std::pow(v, 1.0 / tau - 1.0);
        }
        case CesBranch::cobb_douglas: {
            const double kp = static_cast<double>(idx.size());
            const double n = kp + (p.beta0 > 0.0 ? 1.0 : 0.0);
            double c = (ces_cost(pi, 0.0, v, p)) / kp;
            return c * n / (tau * v);
        }
        case CesBranch::general:
        default: {
            const LogE e = log_requirement(v, p);
            if (e.clamped) return 0.0;
            const PriceIndex px = price_index(pi, p, idx);
            const double ln_p = ((rho - 1.0) / rho) * px.ln_s;
            return std::exp(ln_p + ((1.0 - rho) / rho) * e.ln_e +
                            (rho / tau - 1.0) * std::log(v) - std::log(tau));
        }
    }
}

std::vector<double> node_demand(const std::vector<double>& pi, double v, const CesParams& p) {
    check_ces_params(p);
    check_prices(pi, p);
    require(v > 0.0, "node_demand: target must be positive");

    const auto idx = included(p);
    require(!idx.empty(), "node_demand: node uses no discretionary input");
    const double rho = p.rho, tau = p.tau;
    std::vector<double> d(p.beta.size(), 0.0);

    switch (ces_branch(rho)) {
        case CesBranch::linear: {
            double e = std::pow(v, 1.0 / tau) - p.beta0;
            if (e <= 0.0) return d;
            int j = argmin_unit_price(pi, p, idx);
            d[j] = e / p.beta[j];
            return d;
        }
        case CesBranch::leontief: {
            if (p.beta0 > 0.0 && v > std::pow(p.beta0, tau)) {
                throw FeasibilityError("node_demand: target exceeds capacity");
            }
            double q = std::pow(v, 1.0 / tau);
            for (int l : idx) d[l] = q / p.beta[l];
            return d;
        }
        case CesBranch::cobb_douglas: {
            const double kp = static_cast<double>(idx.size());
            double c = ces_cost(pi, 0.0, v, p) / kp;
            for (int l : idx) d[l] = c / pi[l];
            return d;
        }
        case CesBranch::general:
        default: {
            const LogE e = log_requirement(v, p);
            if (e.clamped) return d;
            const PriceIndex px = price_index(pi, p, idx);
            const double f = 1.0 / (rho - 1.0);
            for (int l : idx) {
                d[l] = std::exp(-px.ln_s / rho + f * std::log(pi[l]) -
                                rho * f * std::log(p.beta[l]) + e.ln_e / rho);
            }
            return d;
        }
    }
}

std::vector<double> infer_input_prices(const std::vector<double>& alloc, const CesParams& node1) {
    check_ces_params(node1);
    require(alloc.size() == node1.beta.size(), "infer_input_prices: dimension mismatch");
    const double rho = node1.rho;
    require(std::isfinite(rho) && rho > kRhoLeontief,
            "infer_input_prices: first-order condition undefined at the Leontief limit");
    require(node1.beta[0] > 0.0, "infer_input_prices: node 1 does not use the numeraire");
    for (size_t k = 0; k < alloc.size(); ++k) {
        if (node1.beta[k] > 0.0 && alloc[k] <= 0.0) {
            throw FeasibilityError(
                "infer_input_prices: zero allocation at node 1; prices not inferable");
        }
    }
    std::vector<double> pi(alloc.size(), 1.0);
    for (size_t k = 1; k < alloc.size(); ++k) {
        if (node1.beta[k] <= 0.0) {
            throw FeasibilityError(
                "infer_input_prices: input not employed by node 1; additional normalization "
                "required");
        }
        pi[k] = std::exp(rho * (std::log(node1.beta[k]) - std::log(node1.beta[0])) +
                         (rho - 1.0) * (std::log(alloc[k]) - std::log(alloc[0])));
    }
    return pi;
}

DemandPartials demand_partials(const std::vector<double>& pi, double v, const CesParams& p) {
    check_ces_params(p);
    check_prices(pi, p);
    const size_t K = p.beta.size();
    const auto idx = included(p);
    const double rho = p.rho, tau = p.tau;

    DemandPartials out;
    out.d = node_demand(pi, v, p);
    out.dd_dpi.assign(K * K, 0.0);
    out.dd_dv.assign(K, 0.0);
    out.dd_dbeta.assign(K * K, 0.0);
    out.dd_dbeta0.assign(K, 0.0);
    out.dd_drho.assign(K, 0.0);
    out.dd_dtau.assign(K, 0.0);

    const double lv = std::log(v);

    switch (ces_branch(rho)) {
        case CesBranch::linear: {
            double e = std::pow(v, 1.0 / tau) - p.beta0;
            if (e <= 0.0) return out;
            int j = argmin_unit_price(pi, p, idx);
            out.dd_dv[j] = (1.0 / tau) * std::pow(v, 1.0 / tau - 1.0) / p.beta[j];
            out.dd_dbeta[j * K + j] = -e / sqr(p.beta[j]);
            if (p.beta0 > 0.0) out.dd_dbeta0[j] = -1.0 / p.beta[j];
            out.dd_dtau[j] = -std::pow(v, 1.0 / tau) * lv / (tau * tau * p.beta[j]);
            return out;
        }
        case CesBranch::leontief: {
            double q = std::pow(v, 1.0 / tau);
            for (int l : idx) {
                out.dd_dv[l] = (1.0 / tau) * std::pow(v, 1.0 / tau - 1.0) / p.beta[l];
                out.dd_dbeta[l * K + l] = -out.d[l] / p.beta[l];
                out.dd_dtau[l] = -(q / p.beta[l]) * lv / (tau * tau);
            }
            return out;
        }
        case CesBranch::cobb_douglas: {
            const double kp = static_cast<double>(idx.size());
            const double n = kp + (p.beta0 > 0.0 ? 1.0 : 0.0);
            for (int j : idx) {
                const double dj = out.d[j];
                for (int i : idx) {
                    out.dd_dpi[j * K + i] =
                        dj * ((1.0 / kp) - (i == j ? 1.0 : 0.0)) / pi[i];
                    out.dd_dbeta[j * K + i] = -dj / (kp * p.beta[i]);
                }
                out.dd_dv[j] = dj * n / (tau * kp * v);
                if (p.beta0 > 0.0) out.dd_dbeta0[j] = -dj / (kp * p.beta0);
                out.dd_dtau[j] = -dj * n * lv / (tau * tau * kp);
            }
            return out;
        }
        case CesBranch::general:
        default: {
            const LogE e = log_requirement(v, p);
            if (e.clamped) return out;
            const PriceIndex px = price_index(pi, p, idx);
            const double E = std::exp(e.ln_e);
            const double A = std::exp(e.ln_a);  // v^(rho/tau)
            const double B = p.beta0 > 0.0 ? std::pow(p.beta0, rho) : 0.0;
            const double dE_dv = (rho / tau) * A / v;
            const double dE_db0 = p.beta0 > 0.0 ? -rho * std::pow(p.beta0, rho - 1.0) : 0.0;
            const double dE_drho =
                A * lv / tau - (p.beta0 > 0.0 ? B * std::log(p.beta0) : 0.0);
            const double dE_dtau = -A * rho * lv / (tau * tau);
            const double rm1 = rho - 1.0;
            double sum_sig = 0.0;  // sum_l sigma_l (ln pi_l - ln beta_l)
            for (int l : idx) sum_sig += px.sigma[l] * (std::log(pi[l]) - std::log(p.beta[l]));

            for (int j : idx) {
                const double dj = out.d[j];
                for (int i : idx) {
                    out.dd_dpi[j * K + i] =
                        dj * (((i == j ? 1.0 : 0.0) - px.sigma[i]) / (rm1 * pi[i]));
                    out.dd_dbeta[j * K + i] =
                        dj * (px.sigma[i] - (i == j ? 1.0 : 0.0) * rho) / (rm1 * p.beta[i]);
                }
                out.dd_dv[j] = dj * A / (tau * v * E);
                if (p.beta0 > 0.0) out.dd_dbeta0[j] = dj * dE_db0 / (rho * E);
                out.dd_dtau[j] = dj * dE_dtau / (rho * E);
                out.dd_drho[j] =
                    dj * (px.ln_s / (rho * rho) + sum_sig / (rho * rm1 * rm1) -
                          (std::log(pi[j]) - std::log(p.beta[j])) / (rm1 * rm1) -
                          e.ln_e / (rho * rho) + dE_drho / (rho * E));
            }
            return out;
        }
    }
}

PricePartials price_partials(const std::vector<double>& pi, double v, const CesParams& p) {
    check_ces_params(p);
    check_prices(pi, p);
    const size_t K = p.beta.size();
    const auto idx = included(p);
    const double rho = p.rho, tau = p.tau;

    PricePartials out;
    out.phi = price_activation(pi, v, p);
    out.dphi_dpi.assign(K, 0.0);
    out.dphi_dbeta.assign(K, 0.0);

    const double lv = std::log(v);

    switch (ces_branch(rho)) {
        case CesBranch::linear: {
            double e = std::pow(v, 1.0 / tau) - p.beta0;
            if (e < 0.0) return out;
            int j = argmin_unit_price(pi, p, idx);
            const double g = (1.0 / tau) * std::pow(v, 1.0 / tau - 1.0);
            out.dphi_dpi[j] = g / p.beta[j];
            out.dphi_dbeta[j] = -out.phi / p.beta[j];
            out.dphi_dv = (pi[j] / p.beta[j]) * (1.0 / tau) * (1.0 / tau - 1.0) *
                          std::pow(v, 1.0 / tau - 2.0);
            out.dphi_dtau = out.phi * (-1.0 / tau - lv / (tau * tau));
            return out;
        }
        case CesBranch::leontief: {
            const double g = (1.0 / tau) * std::pow(v, 1.0 / tau - 1.0);
            double r = 0.0;
            for (int l : idx) {
                out.dphi_dpi[l] = g / p.beta[l];
                out.dphi_dbeta[l] = -(pi[l] / sqr(p.beta[l])) * g;
                r += pi[l] / p.beta[l];
            }
            out.dphi_dv = r * (1.0 / tau) * (1.0 / tau - 1.0) * std::pow(v, 1.0 / tau - 2.0);
            out.dphi_dtau = out.phi * (-1.0 / tau - lv / (tau * tau));
            return out;
        }
        case CesBranch::cobb_douglas: {
            const double kp = static_cast<double>(idx.size());
            const double n = kp + (p.beta0 > 0.0 ? 1.0 : 0.0);
            for (int i : idx) {
                out.dphi_dpi[i] = out.phi / (kp * pi[i]);
                out.dphi_dbeta[i] = -out.phi / (kp * p.beta[i]);
            }
            out.dphi_dv = out.phi * (n / (tau * kp * v) - 1.0 / v);
            if (p.beta0 > 0.0) out.dphi_dbeta0 = -out.phi / (kp * p.beta0);
            out.dphi_dtau = out.phi * (-n * lv / (tau * tau * kp) - 1.0 / tau);
            return out;
        }
        case CesBranch::general:
        default: {
            const LogE e = log_requirement(v, p);
            if (e.clamped) return out;
            const PriceIndex px = price_index(pi, p, idx);
            const double E = std::exp(e.ln_e);
            const double A = std::exp(e.ln_a);
            const double B = p.beta0 > 0.0 ? std::pow(p.beta0, rho) : 0.0;
            const double dE_drho =
                A * lv / tau - (p.beta0 > 0.0 ? B * std::log(p.beta0) : 0.0);
            double sum_sig = 0.0;
            for (int l : idx) sum_sig += px.sigma[l] * (std::log(pi[l]) - std::log(p.beta[l]));
            const double dlnS_drho = -sum_sig / sqr(rho - 1.0);

            for (int i : idx) {
                out.dphi_dpi[i] = out.phi * px.sigma[i] / pi[i];
                out.dphi_dbeta[i] = -out.phi * px.sigma[i] / p.beta[i];
            }
            out.dphi_dv =
                out.phi * ((1.0 - rho) * A / (tau * v * E) + (rho / tau - 1.0) / v);
            if (p.beta0 > 0.0) {
                out.dphi_dbeta0 = out.phi * (rho - 1.0) * std::pow(p.beta0, rho - 1.0) / E;
            }
            out.dphi_dtau = out.phi * (-(1.0 - rho) * A * lv / (tau * tau * E) -
                                       rho * lv / (tau * tau) - 1.0 / tau);
            out.dphi_drho =
                out.phi * (px.ln_s / (rho * rho) + ((rho - 1.0) / rho) * dlnS_drho -
                           e.ln_e / (rho * rho) + ((1.0 - rho) / rho) * dE_drho / E +
                           lv / tau);
            return out;
        }
    }
}

}  // namespace sieve
