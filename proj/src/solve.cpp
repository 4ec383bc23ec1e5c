#include <algorithm>
#include <cmath>
#include <functional>

#include "sieve/cnl.hpp"
#include "sieve/lp.hpp"
#include "sieve/network.hpp"

namespace sieve {

namespace {

// Capacity-safe node target: complements-type nodes (rho < 0, beta0 > 0)
// cannot exceed beta0^tau. Returns the clamped target and flags the clamp.
double clamp_target(const NodeParams& n, double t, int* clamps) {
    double tt = std::max(t, 1e-12);
    if (n.beta0 > 0.0 && n.rho < 0.0) {
        const double cap = std::pow(n.beta0, n.tau);
        const double lim = n.rho < kRhoLeontief ? cap : cap * (1.0 - 1e-9);
        if (tt > lim) {
            tt = lim;
            if (clamps) ++(*clamps);
        }
    }
    return tt;
}

std::vector<double> layer_pi(const StateVector& h, int s) {
    std::vector<double> out(h.widths[s]);
    for (int k = 0; k < h.widths[s]; ++k) out[k] = h.pi(s, k);
    return out;
}

// One backward demand sweep (layer S-1 down to 0) into `vnew`, and one
// forward price sweep (1 up to S) into `pinew`, evaluated at the current
// states. Gauss-Seidel variants update h in place instead.
struct SweepResult {
    double max_delta = 0.0;
    int clamps = 0;
};

SweepResult production_sweep(const NetworkSpec& net, StateVector& h, double damping) {
    const int S = net.depth();
    SweepResult r;
    // demand: v_k^(s) = sum_l d_kl(pi^(s), v^(s+1))
    for (int s = S - 1; s >= 0; --s) {
        const auto pi_s = layer_pi(h, s);
        std::vector<double> vnew(net.widths[s], 0.0);
        for (int l = 0; l < net.widths[s + 1]; ++l) {
            const NodeParams& node = net.nodes[s + 1][l];
            const double t = clamp_target(node, h.v(s + 1, l), &r.clamps);
            const auto d = node_demand(pi_s, t, net.ces_at(s + 1, l));
            for (int k = 0; k < net.widths[s]; ++k) vnew[k] += d[k];
        }
        for (int k = 0; k < net.widths[s]; ++k) {
            const double old = h.v(s, k);
            r.max_delta = std::max(r.max_delta, std::fabs(vnew[k] - old));
            h.v(s, k) = old + damping * (vnew[k] - old);
        }
    }
    // prices: pi_k^(s) = phi(pi^(s-1), v_k^(s))
    for (int s = 1; s <= S; ++s) {
        const auto pi_prev = layer_pi(h, s - 1);
        for (int k = 0; k < net.widths[s]; ++k) {
            const NodeParams& node = net.nodes[s][k];
            const double t = clamp_target(node, h.v(s, k), nullptr);
            const double phi = price_activation(pi_prev, t, net.ces_at(s, k));
            const double old = h.pi(s, k);
            r.max_delta = std::max(r.max_delta, std::fabs(phi - old));
            h.pi(s, k) = old + damping * (phi - old);
        }
    }
    return r;
}

}  // namespace

// upsilon(h) evaluated at fixed h (pinned coordinates copied through).
StateVector apply_maps(const NetworkSpec& net, const StateVector& h) {
    const int S = net.depth();
    StateVector out = h;
    if (net.kind == NetKind::choice) {
        for (int s = 0; s < S; ++s) {
            std::vector<double> child_v(net.widths[s + 1]);
            for (int l = 0; l < net.widths[s + 1]; ++l) child_v[l] = h.v(s + 1, l);
            for (int k = 0; k < net.widths[s]; ++k) {
                out.v(s, k) = cnl_node_value(net.nodes[s][k], child_v);
            }
            for (int l = 0; l < net.widths[s + 1]; ++l) out.pi(s + 1, l) = 0.0;
            for (int k = 0; k < net.widths[s]; ++k) {
                const auto t = cnl_node_transitions(net.nodes[s][k], child_v);
                for (int l = 0; l < net.widths[s + 1]; ++l) {
                    out.pi(s + 1, l) += t[l] * h.pi(s, k);
                }
            }
        }
        return out;
    }
    for (int s = S - 1; s >= 0; --s) {
        const auto pi_s = layer_pi(h, s);
        std::vector<double> vnew(net.widths[s], 0.0);
        for (int l = 0; l < net.widths[s + 1]; ++l) {
            const NodeParams& node = net.nodes[s + 1][l];
            const double t = clamp_target(node, h.v(s + 1, l), nullptr);
            const auto d = node_demand(pi_s, t, net.ces_at(s + 1, l));
            for (int k = 0; k < net.widths[s]; ++k) vnew[k] += d[k];
        }
        for (int k = 0; k < net.widths[s]; ++k) out.v(s, k) = vnew[k];
    }
    for (int s = 1; s <= S; ++s) {
        const auto pi_prev = layer_pi(h, s - 1);
        for (int k = 0; k < net.widths[s]; ++k) {
            const NodeParams& node = net.nodes[s][k];
            const double t = clamp_target(node, h.v(s, k), nullptr);
            out.pi(s, k) = price_activation(pi_prev, t, net.ces_at(s, k));
        }
    }
    return out;
}

namespace {

StateVector choice_solve(const NetworkSpec& net, const std::vector<double>& U,
                         SolveReport* report) {
    const auto st = choice_states(net, U);
    StateVector h(net.widths);
    for (int s = 0; s <= net.depth(); ++s) {
        for (int k = 0; k < net.widths[s]; ++k) {
            h.v(s, k) = st.v[s][k];
            h.pi(s, k) = st.pi[s][k];
        }
    }
    if (report) {
        report->iterations = 2;  // one inclusive-value pass, one reach pass
        report->residual = 0.0;
        report->clamps = 0;
    }
    return h;
}

}  // namespace

StateVector solve_states(const NetworkSpec& net, const std::vector<double>& x,
                         const std::vector<double>* p, const std::vector<double>& y_target,
                         const SolveOptions& opt, SolveReport* report, const StateVector* warm) {
    {
        const auto diags = validate(net);
        if (!diags.empty()) throw std::invalid_argument("solve_states: invalid network: " + diags.front());
    }
    const int S = net.depth();

    if (net.kind == NetKind::choice) {
        const std::vector<double>& U = y_target.empty() ? x : y_target;
        return choice_solve(net, U, report);
    }

    require(static_cast<int>(y_target.size()) == net.widths[S],
            "solve_states: y_target length != K_S");
    for (double y : y_target) require(y > 0.0, "solve_states: nonpositive output target");
    if (p) {
        require(static_cast<int>(p->size()) == net.widths[0],
                "solve_states: price length != K_0");
        for (double v : *p) require(v > 0.0, "solve_states: nonpositive input price");
    }
    if (!x.empty()) {
        require(static_cast<int>(x.size()) == net.widths[0],
                "solve_states: x length != K_0");
    }

    StateVector h(net.widths);
    if (warm && warm->widths == net.widths) {
        h = *warm;
    } else {
        // pi all ones; v by an equal-split feasible forward plan
        for (int s = 0; s <= S; ++s) {
            for (int k = 0; k < net.widths[s]; ++k) h.pi(s, k) = 1.0;
        }
        std::vector<double> prev = x.empty() ? std::vector<double>(net.widths[0], 1.0) : x;
        for (int k = 0; k < net.widths[0]; ++k) h.v(0, k) = prev[k];
        for (int s = 1; s <= S; ++s) {
            std::vector<double> cur(net.widths[s]);
            std::vector<double> split(prev.size());
            for (size_t l = 0; l < prev.size(); ++l) split[l] = prev[l] / net.widths[s];
            for (int k = 0; k < net.widths[s]; ++k) {
                cur[k] = std::max(eval_ces(split, net.ces_at(s, k)), 1e-9);
                h.v(s, k) = cur[k];
            }
            prev = cur;
        }
    }
    // pinned boundary states
    for (int m = 0; m < net.widths[S]; ++m) h.v(S, m) = y_target[m];
    for (int k = 0; k < net.widths[0]; ++k) h.pi(0, k) = p ? (*p)[k] : 1.0;

    int iters = 0;
    SweepResult last;
    bool converged = false;
    double damping = opt.damping;
    double prev_delta = kPosInf;
    double first_delta = 1.0;
    int growth_streak = 0;
    for (; iters < opt.max_iter; ++iters) {
        last = production_sweep(net, h, damping);
        if (!std::isfinite(last.max_delta)) {
            throw SolveError("solve_states: non-finite states during iteration", kPosInf);
        }
        if (iters == 0) first_delta = std::max(last.max_delta, 1.0);
        if (last.max_delta > 1e10 * first_delta) {
            throw SolveError("solve_states: diverging iteration", last.max_delta);
        }
        // oscillating sweeps (elastic substitution under decreasing returns)
        // get progressively heavier damping
        if (last.max_delta > prev_delta * 1.01) {
            if (++growth_streak >= 3 && damping > 0.02) {
                damping *= 0.5;
                growth_streak = 0;
            }
        } else {
            growth_streak = 0;
        }
        prev_delta = last.max_delta;
        double scale = 1.0;
        for (double v : h.data) scale = std::max(scale, std::fabs(v));
        const double eff_tol = std::max(opt.tol, 32.0 * 2.22e-16 * scale);
        if (opt.enforce_input_feasibility && !x.empty()) {
            for (int k = 0; k < net.widths[0]; ++k) {
                if (h.v(0, k) > x[k] * (1.0 + opt.feasibility_slack) + opt.feasibility_slack) {
                    throw FeasibilityError("solve_states: target infeasible, demand for input " +
                                           std::to_string(k) + " exceeds supply");
                }
            }
        }
        if (last.max_delta < eff_tol) {
            converged = true;
            break;
        }
    }
    const double res = state_residual(net, h, x, p, y_target);
    if (report) {
        report->iterations = iters + 1;
        report->residual = res;
        report->clamps = last.clamps;
    }
    if (!converged) {
        throw SolveError("solve_states: no convergence after " + std::to_string(opt.max_iter) +
                             " iterations (residual " + std::to_string(res) + ")",
                         res);
    }
    if (last.clamps > 0) {
        throw FeasibilityError("solve_states: persistent capacity clamping at convergence");
    }
    return h;
}

double state_residual(const NetworkSpec& net, const StateVector& h,
                      const std::vector<double>& x, const std::vector<double>* p,
                      const std::vector<double>& y_target) {
    const int S = net.depth();
    double res = 0.0;
    if (net.kind == NetKind::choice) {
        const std::vector<double>& U = y_target.empty() ? x : y_target;
        const auto st = choice_states(net, U);
        for (int s = 0; s <= S; ++s) {
            for (int k = 0; k < net.widths[s]; ++k) {
                res = std::max(res, std::fabs(st.v[s][k] - h.v(s, k)));
                res = std::max(res, std::fabs(st.pi[s][k] - h.pi(s, k)));
            }
        }
        return res;
    }
    const StateVector probe = apply_maps(net, h);
    for (int s = 0; s < S; ++s) {  // v rows (top layer pinned)
        for (int k = 0; k < net.widths[s]; ++k) {
            res = std::max(res, std::fabs(probe.v(s, k) - h.v(s, k)));
        }
    }
    for (int s = 1; s <= S; ++s) {  // pi rows (layer 0 pinned)
        for (int k = 0; k < net.widths[s]; ++k) {
            res = std::max(res, std::fabs(probe.pi(s, k) - h.pi(s, k)));
        }
    }
    return res;
}

CostEval production_cost(const NetworkSpec& net, const std::vector<double>& prices,
                         double scale, const SolveOptions& opt, const StateVector* warm) {
    std::vector<double> u = net.output_dir;
    if (u.empty()) u.assign(net.widths.back(), 1.0);
    std::vector<double> y(u.size());
    for (size_t m = 0; m < u.size(); ++m) y[m] = scale * u[m];

    SolveOptions o = opt;
    o.enforce_input_feasibility = false;
    CostEval ce;
    ce.states = solve_states(net, {}, &prices, y, o, nullptr, warm);
    ce.demand.resize(net.widths[0]);
    ce.cost = 0.0;
    for (int k = 0; k < net.widths[0]; ++k) {
        ce.demand[k] = ce.states.v(0, k);
        ce.cost += prices[k] * ce.demand[k];
    }
    if (net.pi0 > 0.0) {
        int n_nodes = 0;
        for (int s = 1; s <= net.depth(); ++s) n_nodes += net.widths[s];
        ce.cost += net.pi0 * n_nodes;
    }
    ce.top_prices.resize(net.widths.back());
    for (int m = 0; m < net.widths.back(); ++m) ce.top_prices[m] = ce.states.pi(net.depth(), m);
    return ce;
}

double production_scale_for_budget(const NetworkSpec& net, const std::vector<double>& prices,
                                   double budget, const SolveOptions& opt, CostEval* ce_out) {
    if (budget <= 0.0) return 0.0;
    std::vector<double> u = net.output_dir;
    if (u.empty()) u.assign(net.widths.back(), 1.0);

    StateVector warm;
    bool have_warm = false;
    CostEval ce;
    auto cost_at = [&](double s) -> double {
        try {
            ce = production_cost(net, prices, s, opt, have_warm ? &warm : nullptr);
            warm = ce.states;
            have_warm = true;
            return ce.cost;
        } catch (const FeasibilityError&) {
            return kPosInf;
        } catch (const SolveError&) {
            return kPosInf;
        }
    };
    // bracket the budget
    double lo = 0.0, hi = 1.0;
    double c_hi = cost_at(hi);
    int grow = 0;
    while (c_hi < budget && grow++ < 60) {
        lo = hi;
        hi *= 2.0;
        c_hi = cost_at(hi);
    }
    if (c_hi < budget) return hi;  // cost never reaches the budget within range
    // safeguarded Newton on C(lambda) - budget, derivative u' pi^(S)
    double lam = std::min(std::max(0.5 * (lo + hi), 1e-12), hi);
    for (int it = 0; it < 80; ++it) {
        const double c = cost_at(lam);
        if (c < budget) {
            lo = lam;
        } else {
            hi = lam;
        }
        double next;
        if (c < kPosInf) {
            double dc = 0.0;
            for (size_t m = 0; m < u.size(); ++m) dc += u[m] * ce.top_prices[m];
            next = dc > 0.0 ? lam - (c - budget) / dc : 0.5 * (lo + hi);
        } else {
            next = 0.5 * (lo + hi);
        }
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - lam) <= 1e-13 * std::max(1.0, lam)) {
            lam = next;
            break;
        }
        lam = next;
    }
    if (cost_at(lam) == kPosInf) {
        lam = lo;
        cost_at(lam);
    }
    if (ce_out) *ce_out = ce;
    return lam;
}

std::vector<std::vector<double>> price_lattice(int dim, int resolution) {
    std::vector<std::vector<double>> pts;
    std::vector<int> comp(dim, 0);
    const double denom = resolution + 0.5 * dim;
    // all compositions of `resolution` into `dim` nonnegative parts
    std::function<void(int, int)> rec = [&](int pos, int left) {
        if (pos == dim - 1) {
            comp[pos] = left;
            std::vector<double> p(dim);
            for (int i = 0; i < dim; ++i) p[i] = (comp[i] + 0.5) / denom;
            pts.push_back(std::move(p));
            return;
        }
        for (int a = 0; a <= left; ++a) {
            comp[pos] = a;
            rec(pos + 1, left - a);
        }
    };
    rec(0, resolution);
    return pts;
}

int default_lattice_resolution(const NetworkSpec& net) {
    if (net.price_lattice > 0) return net.price_lattice;
    const int K = net.widths[0];
    if (K <= 1) return 0;
    if (K == 2) return 16;
    if (K == 3) return 8;
    if (K == 4) return 6;
    return 4;
}

namespace {

// Exact frontier of a two-stage perfect-complements / perfect-substitutes
// network: max lambda s.t. the layer-1 plan z fits the inputs and the linear
// top layer delivers lambda * u.
double polytope_scale(const NetworkSpec& net, const std::vector<double>& x,
                      const std::vector<double>& u) {
    const int K = net.widths[0];
    const int Q = net.widths[1];
    const int M = net.widths[2];
    const int nv = Q + 1;  // z_1..z_Q, lambda
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    for (int l = 0; l < K; ++l) {  // input availability
        std::vector<double> row(nv, 0.0);
        for (int q = 0; q < Q; ++q) {
            const double beta = net.nodes[1][q].beta[l];
            if (beta > 0.0) row[q] = 1.0 / beta;
        }
        A.push_back(row);
        b.push_back(x[l]);
    }
    for (int m = 0; m < M; ++m) {  // lambda u_m - sum_q beta_mq z_q <= 0
        std::vector<double> row(nv, 0.0);
        for (int q = 0; q < Q; ++q) row[q] = -net.nodes[2][m].beta[q];
        row[Q] = u[m];
        A.push_back(row);
        b.push_back(0.0);
    }
    std::vector<double> c(nv, 0.0), lo(nv, 0.0), up(nv, kPosInf);
    c[Q] = 1.0;
    for (int q = 0; q < Q; ++q) {
        const double b0 = net.nodes[1][q].beta0;
        if (b0 > 0.0) up[q] = b0;  // tau = 1 capacity
    }
    const LpResult r = solve_lp(c, A, b, lo, up);
    if (!r.optimal) {
        throw SolveError("predict_outputs: LP evaluation failed", 0.0);
    }
    return r.value;
}

}  // namespace

std::vector<double> predict_outputs(const NetworkSpec& net, const std::vector<double>& x,
                                    const std::vector<double>* p, PredictInfo* info) {
    {
        const auto diags = validate(net);
        if (!diags.empty()) {
            throw std::invalid_argument("predict_outputs: invalid network: " + diags.front());
        }
    }
    if (net.kind == NetKind::choice) {
        return ccp(net, x);
    }

    require(static_cast<int>(x.size()) == net.widths[0], "predict_outputs: x length != K_0");
    for (double v : x) require(v >= 0.0, "predict_outputs: negative input");
    std::vector<double> u = net.output_dir;
    if (u.empty()) u.assign(net.widths.back(), 1.0);

    if (is_two_stage_polytope(net)) {
        const double lam = polytope_scale(net, x, u);
        if (info) {
            info->scale = lam;
            info->lp_path = true;
        }
        std::vector<double> y(u.size());
        for (size_t m = 0; m < u.size(); ++m) y[m] = lam * u[m];
        return y;
    }

    // Dual price search on a fixed lattice: every candidate price vector
    // yields an upper facet lambda_pi(x); the prediction is their lower
    // envelope, which keeps the map concave and nondecreasing in x exactly.
    auto lattice = price_lattice(net.widths[0], default_lattice_resolution(net));
    if (p) {
        std::vector<double> pn = *p;
        double s = 0.0;
        for (double v : pn) s += v;
        for (double& v : pn) v /= s;
        lattice.push_back(pn);
    }

    const bool crs = is_constant_returns(net);
    double best = kPosInf;
    int best_idx = -1;
    CostEval best_ce;
    for (size_t i = 0; i < lattice.size(); ++i) {
        const auto& pi = lattice[i];
        double px = 0.0;
        for (int k = 0; k < net.widths[0]; ++k) px += pi[k] * x[k];
        double lam;
        CostEval ce;
        if (crs) {
            ce = production_cost(net, pi, 1.0);
            lam = ce.cost > 0.0 ? px / ce.cost : kPosInf;
        } else {
            // C(lambda u; pi) is increasing in lambda; find C = pi'x
            lam = production_scale_for_budget(net, pi, px, SolveOptions{}, &ce);
        }
        if (lam < best) {
            best = lam;
            best_idx = static_cast<int>(i);
            best_ce = ce;
        }
    }
    if (best_idx < 0 || !std::isfinite(best)) {
        throw SolveError("predict_outputs: dual price search failed", 0.0);
    }
    if (info) {
        info->scale = best;
        info->price_arg = lattice[best_idx];
        info->unit_cost = best_ce.cost;
        info->states = best_ce.states;
        info->lp_path = false;
    }
    std::vector<double> y(u.size());
    for (size_t m = 0; m < u.size(); ++m) y[m] = best * u[m];
    return y;
}

}  // namespace sieve
