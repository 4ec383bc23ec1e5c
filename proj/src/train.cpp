#include "sieve/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "sieve/cnl.hpp"

namespace sieve {

void Dataset::check() const {
    require(!x.empty(), "dataset: empty");
    const size_t k = x.front().size();
    for (const auto& row : x) require(row.size() == k, "dataset: ragged feature rows");
    if (is_choice()) {
        require(label.size() == x.size(), "dataset: label count mismatch");
    } else {
        require(y.size() == x.size(), "dataset: outcome count mismatch");
        const size_t m = y.front().size();
        for (const auto& row : y) require(row.size() == m, "dataset: ragged outcome rows");
    }
    if (!price.empty()) require(price.size() == x.size(), "dataset: price count mismatch");
    for (const auto& row : x) {
        for (double v : row) require(std::isfinite(v), "dataset: non-finite feature");
    }
}

double loss_squared(const std::vector<double>& y, const std::vector<double>& v_top,
                    std::vector<double>* grad_v) {
    require(y.size() == v_top.size(), "loss_squared: dimension mismatch");
    double s = 0.0;
    if (grad_v) grad_v->assign(y.size(), 0.0);
    for (size_t m = 0; m < y.size(); ++m) {
        const double r = y[m] - v_top[m];
        s += r * r;
        if (grad_v) (*grad_v)[m] = -2.0 * r;
    }
    return s;
}

double loss_nll(int label, const std::vector<double>& pi_top, std::vector<double>* grad_pi) {
    require(label >= 0 && label < static_cast<int>(pi_top.size()), "loss_nll: invalid label");
    const double p = std::max(pi_top[label], kProbFloor);
    if (grad_pi) {
        grad_pi->assign(pi_top.size(), 0.0);
        (*grad_pi)[label] = -1.0 / p;
    }
    return -std::log(p);
}

int project(std::vector<double>& theta, const ParamIndex& ix, NetKind kind,
            const TrainConfig& cfg) {
    int clamped = 0;
    const bool prod = kind == NetKind::production;
    for (int i = 0; i < ix.size(); ++i) {
        const auto& e = ix.entries[i];
        double lo, hi;
        switch (e.kind) {
            case ParamIndex::beta:
            case ParamIndex::beta0:
                lo = 0.0;
                hi = kPosInf;
                break;
            case ParamIndex::rho:
                lo = prod ? cfg.rho_min : 1.0;
                hi = prod ? 1.0 : cfg.rho_max;
                break;
            case ParamIndex::tau:
            default:
                lo = cfg.tau_min;
                hi = 1.0;
                break;
        }
        const double t = std::min(std::max(theta[i], lo), hi);
        if (t != theta[i]) {
            theta[i] = t;
            ++clamped;
        }
    }
    return clamped;
}

namespace {

struct ObsGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

// Per-theta cache of the unit-cost solves on the price lattice (constant
// returns: one solve per candidate covers every observation).
struct LatticeCache {
    std::vector<std::vector<double>> prices;
    std::vector<double> unit_cost;
    std::vector<StateVector> states;
    std::vector<std::vector<double>> cost_grad;  // dC/dtheta, filled lazily
    std::vector<char> grad_ready;
};

LatticeCache build_lattice_cache(const NetworkSpec& net, const Dataset& data) {
    LatticeCache lc;
    lc.prices = price_lattice(net.widths[0], default_lattice_resolution(net));
    if (!data.price.empty()) {
        // mean observed price direction as one extra candidate
        std::vector<double> mp(net.widths[0], 0.0);
        for (const auto& row : data.price) {
            for (size_t k = 0; k < row.size(); ++k) mp[k] += row[k];
        }
        double s = std::accumulate(mp.begin(), mp.end(), 0.0);
        if (s > 0.0) {
            for (double& v : mp) v /= s;
            lc.prices.push_back(mp);
        }
    }
    return lc;
}

void refresh_lattice(LatticeCache& lc, const NetworkSpec& net, double solve_tol) {
    const size_t P = lc.prices.size();
    lc.unit_cost.assign(P, 0.0);
    lc.cost_grad.assign(P, {});
    lc.grad_ready.assign(P, 0);
    bool warm = lc.states.size() == P;
    if (!warm) lc.states.assign(P, StateVector{});
    SolveOptions opt;
    opt.tol = solve_tol;
    opt.max_iter = 2000;
    for (size_t i = 0; i < P; ++i) {
        const StateVector* w = warm && lc.states[i].size() > 0 ? &lc.states[i] : nullptr;
        const CostEval ce = production_cost(net, lc.prices[i], 1.0, opt, w);
        lc.unit_cost[i] = ce.cost;
        lc.states[i] = ce.states;
    }
}

const std::vector<double>& lattice_cost_grad(LatticeCache& lc, size_t i, const NetworkSpec& net,
                                             const ParamIndex& ix, int neumann_q) {
    if (!lc.grad_ready[i]) {
        std::vector<double> gh(lc.states[i].size(), 0.0);
        for (int k = 0; k < net.widths[0]; ++k) {
            gh[lc.states[i].v_index(0, k)] = lc.prices[i][k];
        }
        ImplicitOptions iopt;
        iopt.Q = neumann_q;
        lc.cost_grad[i] = implicit_gradient(net, lc.states[i], gh, ix, iopt);
        lc.grad_ready[i] = 1;
    }
    return lc.cost_grad[i];
}

// production: prediction scale, argmin candidate, and loss gradient in theta.
// Constant-returns networks read the cached unit costs; otherwise the scale
// is found per candidate by bisection on C(lambda u; pi) = pi'x and the
// gradient uses the envelope dC/dlambda = u' pi^(S).
ObsGrad production_obs_grad(const NetworkSpec& net, LatticeCache& lc, const ParamIndex& ix,
                            const std::vector<double>& x, const std::vector<double>& y,
                            double bound_b, int neumann_q, bool want_grad, bool crs,
                            double solve_tol) {
    std::vector<double> u = net.output_dir;
    if (u.empty()) u.assign(net.widths.back(), 1.0);
    double best = kPosInf;
    size_t best_i = 0;
    CostEval best_ce;
    SolveOptions sopt;
    sopt.tol = solve_tol;
    sopt.max_iter = 2000;
    for (size_t i = 0; i < lc.prices.size(); ++i) {
        double px = 0.0;
        for (size_t k = 0; k < x.size(); ++k) px += lc.prices[i][k] * x[k];
        double lam;
        CostEval ce;
        if (crs) {
            lam = px / lc.unit_cost[i];
        } else {
            lam = production_scale_for_budget(net, lc.prices[i], px, sopt, &ce);
        }
        if (lam < best) {
            best = lam;
            best_i = i;
            if (!crs) best_ce = ce;
        }
    }
    std::vector<double> pred(u.size());
    std::vector<double> dpred_dlam(u.size());
    for (size_t m = 0; m < u.size(); ++m) {
        pred[m] = best * u[m];
        dpred_dlam[m] = u[m];
        if (bound_b > 0.0 && pred[m] > 2.0 * bound_b) {
            pred[m] = 2.0 * bound_b;
            dpred_dlam[m] = 0.0;
        }
    }
    ObsGrad og;
    std::vector<double> gv;
    og.loss = loss_squared(y, pred, &gv);
    if (!want_grad) return og;
    double dl_dlam = 0.0;
    for (size_t m = 0; m < u.size(); ++m) dl_dlam += gv[m] * dpred_dlam[m];
    og.grad.assign(ix.size(), 0.0);
    if (crs) {
        const auto& gc = lattice_cost_grad(lc, best_i, net, ix, neumann_q);
        const double f = -dl_dlam * best / lc.unit_cost[best_i];
        for (int i = 0; i < ix.size(); ++i) og.grad[i] = f * gc[i];
        return og;
    }
    // envelope at the binding candidate
    std::vector<double> gh(best_ce.states.size(), 0.0);
    for (int k = 0; k < net.widths[0]; ++k) {
        gh[best_ce.states.v_index(0, k)] = lc.prices[best_i][k];
    }
    ImplicitOptions iopt;
    iopt.Q = neumann_q;
    const auto gc = implicit_gradient(net, best_ce.states, gh, ix, iopt);
    double dc_dlam = 0.0;
    for (size_t m = 0; m < u.size(); ++m) dc_dlam += u[m] * best_ce.top_prices[m];
    const double f = -dl_dlam / std::max(dc_dlam, 1e-12);
    for (int i = 0; i < ix.size(); ++i) og.grad[i] = f * gc[i];
    return og;
}

ObsGrad choice_obs_grad(const NetworkSpec& net, const ParamIndex& ix,
                        const std::vector<double>& U, int label, int neumann_q,
                        bool want_grad) {
    const auto h = solve_states(net, U, nullptr, {});
    const int S = net.depth();
    std::vector<double> probs(net.widths[S]);
    for (int m = 0; m < net.widths[S]; ++m) probs[m] = h.pi(S, m);
    ObsGrad og;
    std::vector<double> gpi;
    og.loss = loss_nll(label, probs, &gpi);
    if (!want_grad) return og;
    std::vector<double> gh(h.size(), 0.0);
    for (int m = 0; m < net.widths[S]; ++m) gh[h.pi_index(S, m)] = gpi[m];
    ImplicitOptions iopt;
    iopt.Q = neumann_q;
    og.grad = implicit_gradient(net, h, gh, ix, iopt);
    return og;
}

}  // namespace

FitResult fit(const NetworkSpec& net0, const Dataset& data, const TrainConfig& cfg) {
    data.check();
    {
        const auto diags = validate(net0);
        require(diags.empty(), "fit: invalid network: " + (diags.empty() ? "" : diags.front()));
    }
    const bool choice = net0.kind == NetKind::choice;
    require(choice == data.is_choice(), "fit: dataset kind does not match network kind");
    require(cfg.lr >= 0.0, "fit: negative learning rate");
    require(cfg.batch >= 0, "fit: negative batch size");

    FitResult out;
    out.net = net0;
    ParamIndex ix = ParamIndex::build(out.net);
    auto theta = get_params(out.net, ix);

    // deterministic 80/20 split by seeded shuffle
    std::vector<int> order(data.n());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 split_rng(cfg.seed * 2654435761u + 17);
    std::shuffle(order.begin(), order.end(), split_rng);
    int n_val = cfg.val_split > 0.0 ? static_cast<int>(data.n() * cfg.val_split) : 0;
    if (data.n() - n_val < 1) n_val = 0;
    std::vector<int> train_idx(order.begin(), order.end() - n_val);
    std::vector<int> val_idx(order.end() - n_val, order.end());

    const bool crs = !choice && is_constant_returns(out.net);
    LatticeCache lc = choice ? LatticeCache{} : build_lattice_cache(out.net, data);

    double lr = cfg.lr;
    std::vector<double> mom(ix.size(), 0.0), adam_m(ix.size(), 0.0), adam_v(ix.size(), 0.0);
    long adam_t = 0;
    double prev_train = kPosInf;
    double best_val = kPosInf;
    int stale = 0;

    auto epoch_mean_loss = [&](const std::vector<int>& idx) -> double {
        if (idx.empty()) return 0.0;
        double s = 0.0;
        for (int i : idx) {
            const ObsGrad og =
                choice ? choice_obs_grad(out.net, ix, data.x[i], data.label[i], cfg.neumann_q,
                                         false)
                       : production_obs_grad(out.net, lc, ix, data.x[i], data.y[i],
                                             cfg.bound_b, cfg.neumann_q, false, crs,
                                             cfg.solve_tol);
            s += og.loss;
        }
        return s / idx.size();
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (crs) refresh_lattice(lc, out.net, cfg.solve_tol);

        std::vector<int> sched = train_idx;
        std::mt19937 erng(cfg.seed * 40503u + 1013904223u + epoch);
        std::shuffle(sched.begin(), sched.end(), erng);
        const int bsz = cfg.batch > 0 ? cfg.batch : static_cast<int>(sched.size());

        double grad_norm_acc = 0.0;
        int n_batches = 0;
        int proj_count = 0;
        for (size_t start = 0; start < sched.size(); start += bsz) {
            const size_t stop = std::min(sched.size(), start + bsz);
            std::vector<double> g(ix.size(), 0.0);
            for (size_t t = start; t < stop; ++t) {
                const int i = sched[t];
                ObsGrad og;
                try {
                    og = choice ? choice_obs_grad(out.net, ix, data.x[i], data.label[i],
                                                  cfg.neumann_q, true)
                                : production_obs_grad(out.net, lc, ix, data.x[i], data.y[i],
                                                      cfg.bound_b, cfg.neumann_q, true, crs,
                                                      cfg.solve_tol);
                } catch (const SolveError& e) {
                    throw SolveError("fit: state solve failed at observation " +
                                         std::to_string(i) + ": " + e.what(),
                                     e.residual());
                }
                require(std::isfinite(og.loss), "fit: non-finite loss at observation " +
                                                    std::to_string(i));
                for (int j = 0; j < ix.size(); ++j) g[j] += og.grad[j];
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            double gn = 0.0;
            for (double& v : g) {
                v *= inv;
                gn += v * v;
            }
            grad_norm_acc += std::sqrt(gn);
            ++n_batches;

            // descent step
            ++adam_t;
            for (int j = 0; j < ix.size(); ++j) {
                double step;
                switch (cfg.optimizer) {
                    case Optimizer::plain_gradient:
                        step = g[j];
                        break;
                    case Optimizer::momentum:
                        mom[j] = cfg.momentum_decay * mom[j] + g[j];
                        step = mom[j];
                        break;
                    case Optimizer::adaptive_moment:
                    default: {
                        adam_m[j] = cfg.adam_beta1 * adam_m[j] + (1 - cfg.adam_beta1) * g[j];
                        adam_v[j] =
                            cfg.adam_beta2 * adam_v[j] + (1 - cfg.adam_beta2) * g[j] * g[j];
                        const double mh = adam_m[j] / (1 - std::pow(cfg.adam_beta1, adam_t));
                        const double vh = adam_v[j] / (1 - std::pow(cfg.adam_beta2, adam_t));
                        step = mh / (std::sqrt(vh) + cfg.adam_eps);
                        break;
                    }
                }
                theta[j] -= lr * step;
            }
            proj_count += project(theta, ix, out.net.kind, cfg);
            set_params(out.net, ix, theta);
            // a node whose shares all hit the zero bound would leave the
            // constraint set's closure; keep it minimally alive
            for (int j = 0; j < ix.size(); ++j) {
                const auto& e = ix.entries[j];
                if (e.kind != ParamIndex::beta || theta[j] > 0.0) continue;
                const NodeParams& nd = out.net.nodes[e.s][e.k];
                bool any = nd.beta0 > 0.0;
                for (double b : nd.beta) any = any || b > 0.0;
                if (!any) {
                    theta[j] = 1e-6;
                    ++proj_count;
                }
            }
            set_params(out.net, ix, theta);
            if (crs && bsz < static_cast<int>(sched.size())) {
                refresh_lattice(lc, out.net, cfg.solve_tol);
            }
        }

        EpochStats st;
        st.epoch = epoch;
        if (crs) refresh_lattice(lc, out.net, cfg.solve_tol);
        st.train_loss = epoch_mean_loss(train_idx);
        st.val_loss = val_idx.empty() ? st.train_loss : epoch_mean_loss(val_idx);
        st.grad_norm = n_batches > 0 ? grad_norm_acc / n_batches : 0.0;
        st.proj_count = proj_count;
        out.history.push_back(st);
        require(std::isfinite(st.train_loss), "fit: non-finite training loss");

        if (cfg.halve_on_increase && st.train_loss > prev_train) lr *= 0.5;
        prev_train = st.train_loss;
        if (cfg.convergence_window > 0) {
            const double v = st.val_loss;
            if (v < best_val - 1e-12) {
                best_val = v;
                stale = 0;
            } else if (++stale >= cfg.convergence_window) {
                break;
            }
        }
    }
    return out;
}

Metrics evaluate(const NetworkSpec& net, const Dataset& data, double bound_b) {
    data.check();
    Metrics m;
    if (net.kind == NetKind::choice) {
        const int M = net.widths.back();
        m.calibration.assign(M, 0.0);
        std::vector<double> freq(M, 0.0);
        int hits = 0;
        for (int i = 0; i < data.n(); ++i) {
            const auto probs = ccp(net, data.x[i]);
            m.mean_loss += loss_nll(data.label[i], probs);
            int arg = 0;
            for (int a = 1; a < M; ++a) {
                if (probs[a] > probs[arg]) arg = a;
            }
            hits += arg == data.label[i];
            freq[data.label[i]] += 1.0;
            for (int a = 0; a < M; ++a) m.calibration[a] += probs[a];
        }
        m.mean_loss /= data.n();
        m.accuracy = static_cast<double>(hits) / data.n();
        for (int a = 0; a < M; ++a) m.calibration[a] = m.calibration[a] / data.n() -
                                                      freq[a] / data.n();
        return m;
    }
    const int M = net.widths.back();
    m.rmse.assign(M, 0.0);
    for (int i = 0; i < data.n(); ++i) {
        auto pred = predict_outputs(net, data.x[i],
                                    data.price.empty() ? nullptr : &data.price[i]);
        if (bound_b > 0.0) {
            for (double& v : pred) v = std::min(v, 2.0 * bound_b);
        }
        m.mean_loss += loss_squared(data.y[i], pred);
        for (int o = 0; o < M; ++o) m.rmse[o] += sqr(data.y[i][o] - pred[o]);
    }
    m.mean_loss /= data.n();
    for (int o = 0; o < M; ++o) m.rmse[o] = std::sqrt(m.rmse[o] / data.n());
    return m;
}

std::string format_epoch(const EpochStats& st) {
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "epoch=%d train_loss=%.17g val_loss=%.17g grad_norm=%.17g proj_count=%d",
                  st.epoch, st.train_loss, st.val_loss, st.grad_norm, st.proj_count);
    return buf;
}

}  // namespace sieve
