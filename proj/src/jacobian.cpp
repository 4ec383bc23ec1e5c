#include "sieve/jacobian.hpp"

#include <algorithm>
#include <cmath>

#include "sieve/cnl.hpp"

namespace sieve {

std::vector<double> SparseJacobian::apply(const std::vector<double>& g) const {
    std::vector<double> out(rows, 0.0);
    for (size_t t = 0; t < val.size(); ++t) out[r[t]] += val[t] * g[c[t]];
    return out;
}

std::vector<double> SparseJacobian::apply_transpose(const std::vector<double>& g) const {
    std::vector<double> out(cols, 0.0);
    for (size_t t = 0; t < val.size(); ++t) out[c[t]] += val[t] * g[r[t]];
    return out;
}

double SparseJacobian::frobenius_norm() const {
    double s = 0.0;
    for (double v : val) s += v * v;
    return std::sqrt(s);
}

ParamIndex ParamIndex::build(const NetworkSpec& net) {
    ParamIndex ix;
    const bool prod = net.kind == NetKind::production;
    const int S = net.depth();
    const int lo = prod ? 1 : 0;
    const int hi = prod ? S : S - 1;
    for (int s = lo; s <= hi; ++s) {
        for (int k = 0; k < net.widths[s]; ++k) {
            const NodeFrozen& f = net.frozen[s][k];
            const NodeParams& n = net.nodes[s][k];
            for (int l = 0; l < static_cast<int>(n.beta.size()); ++l) {
                if (l >= static_cast<int>(f.beta.size()) || !f.beta[l]) {
                    ix.entries.push_back({s, k, beta, l});
                }
            }
            if (prod && !f.beta0) ix.entries.push_back({s, k, beta0, 0});
            if (!f.rho) ix.entries.push_back({s, k, rho, 0});
            if (prod && !f.tau) ix.entries.push_back({s, k, tau, 0});
        }
    }
    return ix;
}

std::vector<double> get_params(const NetworkSpec& net, const ParamIndex& ix) {
    std::vector<double> theta(ix.size());
    for (int i = 0; i < ix.size(); ++i) {
        const auto& e = ix.entries[i];
        const NodeParams& n = net.nodes[e.s][e.k];
        switch (e.kind) {
            case ParamIndex::beta: theta[i] = n.beta[e.l]; break;
            case ParamIndex::beta0: theta[i] = n.beta0; break;
            case ParamIndex::rho: theta[i] = n.rho; break;
            case ParamIndex::tau: theta[i] = n.tau; break;
        }
    }
    return theta;
}

void set_params(NetworkSpec& net, const ParamIndex& ix, const std::vector<double>& theta) {
    require(static_cast<int>(theta.size()) == ix.size(), "set_params: size mismatch");
    for (int i = 0; i < ix.size(); ++i) {
        const auto& e = ix.entries[i];
        NodeParams& n = net.nodes[e.s][e.k];
        switch (e.kind) {
            case ParamIndex::beta: n.beta[e.l] = theta[i]; break;
            case ParamIndex::beta0: n.beta0 = theta[i]; break;
            case ParamIndex::rho: n.rho = theta[i]; break;
            case ParamIndex::tau: n.tau = theta[i]; break;
        }
    }
}

namespace {

std::vector<double> layer_vals(const StateVector& h, int s, bool price) {
    std::vector<double> out(h.widths[s]);
    for (int k = 0; k < h.widths[s]; ++k) out[k] = price ? h.pi(s, k) : h.v(s, k);
    return out;
}

// Choice-node quantities reused by both Jacobians.
struct NestInfo {
    std::vector<double> t;  // transition shares
    std::vector<double> a;  // logits ln beta_l + v_l (child scale)
    double val = 0.0;       // inclusive value
    bool max_branch = false;
};

NestInfo nest_info(const NodeParams& n, const std::vector<double>& child_v) {
    NestInfo out;
    out.t = cnl_node_transitions(n, child_v);
    out.val = cnl_node_value(n, child_v);
    out.max_branch = n.rho >= kRhoMaxBranch;
    out.a.assign(child_v.size(), kNegInf);
    for (size_t l = 0; l < child_v.size(); ++l) {
        if (n.beta[l] > 0.0) out.a[l] = std::log(n.beta[l]) + child_v[l];
    }
    return out;
}

}  // namespace

SparseJacobian jacobian_states(const NetworkSpec& net, const StateVector& h) {
    const int S = net.depth();
    SparseJacobian J;
    J.rows = J.cols = h.size();

    if (net.kind == NetKind::choice) {
        for (int s = 0; s < S; ++s) {
            const auto child_v = layer_vals(h, s + 1, false);
            for (int k = 0; k < net.widths[s]; ++k) {
                const auto info = nest_info(net.nodes[s][k], child_v);
                // inclusive value: d v_k^(s) / d v_l^(s+1) = t_l
                // (leaf layer s+1 = S is pinned data, but its coordinates still
                //  appear as inputs, which keeps the chain intact)
                for (int l = 0; l < net.widths[s + 1]; ++l) {
                    J.add(h.v_index(s + 1, l), h.v_index(s, k), info.t[l]);
                }
            }
        }
        for (int s = 1; s <= S; ++s) {
            const auto child_v = layer_vals(h, s, false);
            std::vector<NestInfo> infos;
            for (int l = 0; l < net.widths[s - 1]; ++l) {
                infos.push_back(nest_info(net.nodes[s - 1][l], child_v));
            }
            for (int k = 0; k < net.widths[s]; ++k) {
                for (int l = 0; l < net.widths[s - 1]; ++l) {
                    J.add(h.pi_index(s - 1, l), h.pi_index(s, k), infos[l].t[k]);
                }
                // transition shares move with the child-layer inclusive values
                for (int m = 0; m < net.widths[s]; ++m) {
                    double g = 0.0;
                    for (int l = 0; l < net.widths[s - 1]; ++l) {
                        const auto& inf = infos[l];
                        if (inf.max_branch) continue;  // flat a.e.
                        const double rho = net.nodes[s - 1][l].rho;
                        g += h.pi(s - 1, l) * rho * inf.t[k] *
                             ((k == m ? 1.0 : 0.0) - inf.t[m]);
                    }
                    J.add(h.v_index(s, m), h.pi_index(s, k), g);
                }
            }
        }
        return J;
    }

    // production
    for (int s = 0; s < S; ++s) {
        const auto pi_s = layer_vals(h, s, true);
        for (int l = 0; l < net.widths[s + 1]; ++l) {
            const auto dp = demand_partials(pi_s, std::max(h.v(s + 1, l), 1e-12),
                                            net.ces_at(s + 1, l));
            const int K = net.widths[s];
            for (int k = 0; k < K; ++k) {
                for (int i = 0; i < K; ++i) {
                    J.add(h.pi_index(s, i), h.v_index(s, k), dp.dd_dpi[k * K + i]);
                }
                J.add(h.v_index(s + 1, l), h.v_index(s, k), dp.dd_dv[k]);
            }
        }
    }
    for (int s = 1; s <= S; ++s) {
        const auto pi_prev = layer_vals(h, s - 1, true);
        for (int k = 0; k < net.widths[s]; ++k) {
            const auto pp = price_partials(pi_prev, std::max(h.v(s, k), 1e-12),
                                           net.ces_at(s, k));
            for (int i = 0; i < net.widths[s - 1]; ++i) {
                J.add(h.pi_index(s - 1, i), h.pi_index(s, k), pp.dphi_dpi[i]);
            }
            J.add(h.v_index(s, k), h.pi_index(s, k), pp.dphi_dv);
        }
    }
    return J;
}

SparseJacobian jacobian_params(const NetworkSpec& net, const StateVector& h,
                               const ParamIndex& ix) {
    const int S = net.depth();
    SparseJacobian J;
    J.rows = ix.size();
    J.cols = h.size();

    if (net.kind == NetKind::choice) {
        // cache per parameterized node
        std::vector<std::vector<NestInfo>> infos(S);
        for (int s = 0; s < S; ++s) {
            const auto child_v = layer_vals(h, s + 1, false);
            for (int k = 0; k < net.widths[s]; ++k) {
                infos[s].push_back(nest_info(net.nodes[s][k], child_v));
            }
        }
        for (int i = 0; i < ix.size(); ++i) {
            const auto& e = ix.entries[i];
            const NodeParams& n = net.nodes[e.s][e.k];
            const NestInfo& inf = infos[e.s][e.k];
            if (inf.max_branch) continue;  // argmax branch is locally flat
            const double pik = h.pi(e.s, e.k);
            if (e.kind == ParamIndex::beta) {
                const int l = e.l;
                if (n.beta[l] <= 0.0) continue;  // structurally excluded edge
                // inclusive value of the node itself
                J.add(i, h.v_index(e.s, e.k), inf.t[l] / n.beta[l]);
                // reach probabilities of the children
                for (int m = 0; m < net.widths[e.s + 1]; ++m) {
                    const double g = pik * n.rho * inf.t[m] *
                                     ((m == l ? 1.0 : 0.0) - inf.t[l]) / n.beta[l];
                    J.add(i, h.pi_index(e.s + 1, m), g);
                }
            } else if (e.kind == ParamIndex::rho) {
                double abar = 0.0;
                for (size_t l = 0; l < inf.t.size(); ++l) {
                    if (inf.t[l] > 0.0) abar += inf.t[l] * inf.a[l];
                }
                J.add(i, h.v_index(e.s, e.k), (abar - inf.val) / n.rho);
                for (int m = 0; m < net.widths[e.s + 1]; ++m) {
                    if (inf.t[m] <= 0.0) continue;
                    J.add(i, h.pi_index(e.s + 1, m), pik * inf.t[m] * (inf.a[m] - abar));
                }
            }
        }
        return J;
    }

    // production: node (s, k) parameters enter its own price map and the
    // demand map of the layer below.
    std::vector<std::vector<DemandPartials>> dps(S + 1);
    std::vector<std::vector<PricePartials>> pps(S + 1);
    for (int s = 1; s <= S; ++s) {
        const auto pi_prev = layer_vals(h, s - 1, true);
        for (int k = 0; k < net.widths[s]; ++k) {
            const double t = std::max(h.v(s, k), 1e-12);
            dps[s].push_back(demand_partials(pi_prev, t, net.ces_at(s, k)));
            pps[s].push_back(price_partials(pi_prev, t, net.ces_at(s, k)));
        }
    }
    for (int i = 0; i < ix.size(); ++i) {
        const auto& e = ix.entries[i];
        const auto& dp = dps[e.s][e.k];
        const auto& pp = pps[e.s][e.k];
        const int K = net.widths[e.s - 1];
        switch (e.kind) {
            case ParamIndex::beta:
                J.add(i, h.pi_index(e.s, e.k), pp.dphi_dbeta[e.l]);
                for (int j = 0; j < K; ++j) {
                    J.add(i, h.v_index(e.s - 1, j), dp.dd_dbeta[j * K + e.l]);
                }
                break;
            case ParamIndex::beta0:
                J.add(i, h.pi_index(e.s, e.k), pp.dphi_dbeta0);
                for (int j = 0; j < K; ++j) J.add(i, h.v_index(e.s - 1, j), dp.dd_dbeta0[j]);
                break;
            case ParamIndex::rho:
                J.add(i, h.pi_index(e.s, e.k), pp.dphi_drho);
                for (int j = 0; j < K; ++j) J.add(i, h.v_index(e.s - 1, j), dp.dd_drho[j]);
                break;
            case ParamIndex::tau:
                J.add(i, h.pi_index(e.s, e.k), pp.dphi_dtau);
                for (int j = 0; j < K; ++j) J.add(i, h.v_index(e.s - 1, j), dp.dd_dtau[j]);
                break;
        }
    }
    return J;
}

std::vector<double> neumann_apply(const SparseJacobian& J, const std::vector<double>& g,
                                  int Q) {
    require(Q >= 0, "neumann_apply: negative truncation order");
    std::vector<double> acc = g, cur = g;
    for (int q = 1; q <= Q; ++q) {
        cur = J.apply(cur);
        double nz = 0.0;
        for (size_t i = 0; i < cur.size(); ++i) {
            acc[i] += cur[i];
            nz += std::fabs(cur[i]);
        }
        if (nz == 0.0) break;  // nilpotent chain exhausted
    }
    return acc;
}

std::vector<double> neumann_apply_adaptive(const SparseJacobian& J,
                                           const std::vector<double>& g, int q_min,
                                           double tol, int cap, int* q_used) {
    std::vector<double> acc = g, cur = g;
    double ref = 0.0;
    for (double v : g) ref = std::max(ref, std::fabs(v));
    ref = std::max(ref, 1e-30);
    int quiet = 0;
    int q = 0;
    for (q = 1; q <= cap; ++q) {
        cur = J.apply(cur);
        double nt = 0.0;
        for (size_t i = 0; i < cur.size(); ++i) {
            acc[i] += cur[i];
            nt = std::max(nt, std::fabs(cur[i]));
        }
        // transients of the non-normal Jacobian can grow before they decay,
        // so demand a run of negligible terms past the a-priori order
        if (nt <= tol * ref) {
            if (++quiet >= 3 && q >= q_min) break;
        } else {
            quiet = 0;
        }
    }
    if (q_used) *q_used = std::min(q, cap);
    return acc;
}

double spectral_bound(const SparseJacobian& J, int iters) {
    require(iters >= 1, "spectral_bound: iters must be >= 1");
    std::vector<double> v(J.cols);
    for (int i = 0; i < J.cols; ++i) v[i] = 1.0 + 0.37 * ((i * 2654435761u) % 97) / 97.0;
    double lam = 0.0;
    for (int it = 0; it < iters; ++it) {
        double nv = 0.0;
        for (double x : v) nv += x * x;
        nv = std::sqrt(nv);
        if (nv == 0.0) return 0.0;
        for (double& x : v) x /= nv;
        v = J.apply(v);
        double nw = 0.0;
        for (double x : v) nw += x * x;
        lam = std::sqrt(nw);
    }
    return lam;
}

int truncation_order(double lambda, double tol, int cap) {
    if (lambda >= 1.0 - 1e-6) return -1;
    if (lambda <= 0.0) return 0;
    for (int q = 0; q <= cap; ++q) {
        if (std::pow(lambda, q + 1) / (1.0 - lambda) <= tol) return q;
    }
    return cap;
}

int exact_truncation_order(const NetworkSpec& net) {
    require(net.kind == NetKind::choice, "exact_truncation_order: acyclic networks only");
    // longest chain: v^(S) -> ... -> v^(1) -> pi^(1) -> ... -> pi^(S)
    return 2 * net.depth() - 1;
}

std::vector<double> solve_series_direct(const SparseJacobian& J, const std::vector<double>& g) {
    const int n = J.rows;
    std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) A[i][i] = 1.0;
    for (size_t t = 0; t < J.val.size(); ++t) A[J.r[t]][J.c[t]] -= J.val[t];
    std::vector<double> xsol = g;
    // Gaussian elimination with partial pivoting
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int rr = col + 1; rr < n; ++rr) {
            if (std::fabs(A[rr][col]) > std::fabs(A[piv][col])) piv = rr;
        }
        if (std::fabs(A[piv][col]) < 1e-14) {
            throw SolveError("solve_series_direct: singular I - Jacobian", 0.0);
        }
        std::swap(A[piv], A[col]);
        std::swap(xsol[piv], xsol[col]);
        for (int rr = col + 1; rr < n; ++rr) {
            const double f = A[rr][col] / A[col][col];
            if (f == 0.0) continue;
            for (int cc = col; cc < n; ++cc) A[rr][cc] -= f * A[col][cc];
            xsol[rr] -= f * xsol[col];
        }
    }
    for (int col = n - 1; col >= 0; --col) {
        double s = xsol[col];
        for (int cc = col + 1; cc < n; ++cc) s -= A[col][cc] * xsol[cc];
        xsol[col] = s / A[col][col];
    }
    return xsol;
}

std::vector<double> implicit_gradient(const NetworkSpec& net, const StateVector& h,
                                      const std::vector<double>& grad_h, const ParamIndex& ix,
                                      const ImplicitOptions& opt) {
    require(static_cast<int>(grad_h.size()) == h.size(),
            "implicit_gradient: cotangent size mismatch");
    const SparseJacobian Jh = jacobian_states(net, h);
    std::vector<double> pulled;
    if (opt.Q >= 0) {
        pulled = neumann_apply(Jh, grad_h, opt.Q);
    } else if (net.kind == NetKind::choice) {
        pulled = neumann_apply(Jh, grad_h, exact_truncation_order(net));
    } else {
        const double lam = spectral_bound(Jh, opt.power_iters);
        const int Q = truncation_order(lam, opt.tol, opt.q_cap);
        if (Q < 0) {
            pulled = solve_series_direct(Jh, grad_h);
        } else {
            pulled = neumann_apply_adaptive(Jh, grad_h, Q, opt.tol, opt.q_cap, nullptr);
        }
    }
    const SparseJacobian Jt = jacobian_params(net, h, ix);
    return Jt.apply(pulled);
}

}  // namespace sieve
