#include "sieve/architect.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sieve/jacobian.hpp"

namespace sieve {

namespace {

NodeFrozen frozen_all(size_t n) {
    NodeFrozen f;
    f.beta.assign(n, 1);
    f.beta0 = f.rho = f.tau = true;
    return f;
}

NodeFrozen frozen_none_beta(size_t n) {
    NodeFrozen f;
    f.beta.assign(n, 0);
    f.beta0 = f.rho = f.tau = true;
    return f;
}

}  // namespace

NetworkSpec build_two_stage_production(const std::vector<SupportPoint>& points) {
    require(!points.empty(), "build_two_stage_production: no support points");
    const int M = static_cast<int>(points.front().y.size());
    const int K = static_cast<int>(points.front().w.size());
    const int Q = static_cast<int>(points.size());
    for (const auto& p : points) {
        require(static_cast<int>(p.y.size()) == M && static_cast<int>(p.w.size()) == K,
                "build_two_stage_production: inconsistent point dimensions");
        for (double v : p.y) require(v > 0.0, "build_two_stage_production: nonpositive output");
        for (double v : p.w) require(v > 0.0, "build_two_stage_production: nonpositive input");
    }

    NetworkSpec net;
    net.kind = NetKind::production;
    net.widths = {K, M * Q, M};
    net.nodes.resize(3);
    net.frozen.resize(3);
    // first layer: perfect complements, beta_(q,m),l = y_qm / (w_ql / M),
    // capacity intercept y_qm; shares trainable, structure frozen
    for (int q = 0; q < Q; ++q) {
        for (int m = 0; m < M; ++m) {
            NodeParams n;
            n.beta.resize(K);
            for (int l = 0; l < K; ++l) n.beta[l] = points[q].y[m] * M / points[q].w[l];
            n.beta0 = points[q].y[m];
            n.rho = kNegInf;
            n.tau = 1.0;
            net.nodes[1].push_back(n);
            NodeFrozen f;
            f.beta.assign(K, 0);
            f.beta0 = false;
            f.rho = true;
            f.tau = true;
            net.frozen[1].push_back(f);
        }
    }
    // second layer: fixed 0/1 assignment of intermediate goods to outputs
    for (int m = 0; m < M; ++m) {
        NodeParams n;
        n.beta.assign(M * Q, 0.0);
        for (int q = 0; q < Q; ++q) n.beta[q * M + m] = 1.0;
        n.rho = 1.0;
        n.tau = 1.0;
        net.nodes[2].push_back(n);
        net.frozen[2].push_back(frozen_all(M * Q));
    }
    net.output_dir.assign(M, 1.0);
    return net;
}

NetworkSpec build_cnl_grid_approximator(
    const std::function<double(const std::vector<double>&)>& F0, int M, int L,
    bool dense_subsets) {
    require(M >= 2, "build_cnl_grid_approximator: need at least two alternatives");
    require(L >= 2, "build_cnl_grid_approximator: grid resolution must be >= 2");

    const double B = 1.0;
    const double level = 2.0 * F0(std::vector<double>(M, B));
    require(level > 0.0 && std::isfinite(level),
            "build_cnl_grid_approximator: oracle nonpositive on the box");

    // monotonicity spot check on the grid
    {
        std::vector<double> w(M, 0.5 * B);
        const double f0 = F0(w);
        for (int m = 0; m < M; ++m) {
            auto wp = w;
            wp[m] += 0.25 * B;
            if (F0(wp) < f0 - 1e-12) {
                throw std::invalid_argument(
                    "build_cnl_grid_approximator: oracle not nondecreasing on the grid");
            }
        }
    }

    // grid over the first M-1 coordinates; the last coordinate solves
    // F0(w_-, z) = level by bisection (monotone)
    const int K2 = static_cast<int>(std::llround(std::pow(double(L), M - 1)));
    std::vector<std::vector<double>> anchors;
    anchors.reserve(K2);
    std::vector<int> digit(M - 1, 0);
    for (int idx = 0; idx < K2; ++idx) {
        int rem = idx;
        std::vector<double> w(M);
        for (int j = 0; j < M - 1; ++j) {
            digit[j] = rem % L;
            rem /= L;
            w[j] = (digit[j] + 1) * (B / L);
        }
        auto fz = [&](double z) {
            auto ww = w;
            ww[M - 1] = z;
            return F0(ww);
        };
        double lo = 1e-9, hi = 1.0;
        int grow = 0;
        while (fz(hi) < level && grow++ < 200) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (fz(mid) < level ? lo : hi) = mid;
        }
        w[M - 1] = hi;
        anchors.push_back(w);
    }

    // supporting-facet weights at each anchor: the gradient of the convex,
    // degree-1 homogeneous oracle gives a linear minorant <g, w> <= F0(w)
    // with equality at the anchor (Euler). Shrunk slightly so numerical
    // differentiation noise cannot break the minorant property.
    std::vector<std::vector<double>> grads(K2, std::vector<double>(M, 0.0));
    for (int k = 0; k < K2; ++k) {
        double gmax = 0.0;
        for (int j = 0; j < M; ++j) {
            const double h = 1e-5 * anchors[k][j];
            auto wp = anchors[k], wm = anchors[k];
            wp[j] += h;
            wm[j] -= h;
            grads[k][j] = std::max((F0(wp) - F0(wm)) / (2.0 * h), 0.0);
            gmax = std::max(gmax, grads[k][j]);
        }
        require(gmax > 0.0, "build_cnl_grid_approximator: flat oracle at a grid anchor");
        for (double& g : grads[k]) g = std::max(g * (1.0 - 1e-7), 1e-9 * gmax);
    }

    // size-M subsets of the anchors: forward-neighbor tessellation, or all of
    // them behind the dense flag (the dense variant is a cross-check only)
    std::vector<std::vector<int>> subsets;
    if (dense_subsets) {
        std::vector<int> comb(M);
        std::function<void(int, int)> rec = [&](int start, int depth) {
            if (depth == M) {
                subsets.push_back(comb);
                return;
            }
            for (int i = start; i < K2; ++i) {
                comb[depth] = i;
                rec(i + 1, depth + 1);
            }
        };
        rec(0, 0);
    } else {
        for (int idx = 0; idx < K2; ++idx) {
            std::vector<int> grp = {idx};
            int rem = idx, stride = 1;
            bool ok = true;
            for (int j = 0; j < M - 1; ++j) {
                const int d = rem % L;
                rem /= L;
                if (d + 1 >= L) {
                    ok = false;
                    break;
                }
                grp.push_back(idx + stride);
                stride *= L;
            }
            if (ok && static_cast<int>(grp.size()) == M) subsets.push_back(grp);
        }
        if (subsets.empty()) subsets.push_back({0});
        // guarantee coverage of every anchor
        std::vector<char> seen(K2, 0);
        for (const auto& g : subsets) {
            for (int i : g) seen[i] = 1;
        }
        for (int i = 0; i < K2; ++i) {
            if (!seen[i]) subsets.push_back(std::vector<int>(std::max(1, M), i));
        }
    }
    const int K1 = static_cast<int>(subsets.size());

    NetworkSpec net;
    net.kind = NetKind::choice;
    net.widths = {1, K1, K2, M};
    net.nodes.resize(4);
    net.frozen.resize(4);
    // root: max over the averaging nodes
    {
        NodeParams n;
        n.beta.assign(K1, 1.0);
        n.rho = kPosInf;
        net.nodes[0].push_back(n);
        net.frozen[0].push_back(frozen_all(K1));
    }
    // averaging layer
    for (const auto& grp : subsets) {
        NodeParams n;
        n.beta.assign(K2, 0.0);
        for (int i : grp) n.beta[i] += 1.0 / M;
        n.rho = 1.0;
        net.nodes[1].push_back(n);
        net.frozen[1].push_back(frozen_all(K2));
    }
    // grid-anchored facet nests: the free weights of the construction
    for (const auto& g : grads) {
        NodeParams n;
        n.beta = g;
        n.rho = 1.0;
        net.nodes[2].push_back(n);
        net.frozen[2].push_back(frozen_none_beta(M));
    }
    return net;
}

NetworkSpec build_sp_ces(int S, int d_star, int Q, int input_dim) {
    require(S >= 1 && Q >= 1, "build_sp_ces: invalid dimensions");
    require(d_star >= 1 && d_star <= input_dim, "build_sp_ces: need 1 <= d_star <= input_dim");

    NetworkSpec net;
    net.kind = NetKind::production;
    net.widths = {input_dim};
    for (int s = 0; s < S; ++s) {
        net.widths.push_back(3 * d_star);
        net.widths.push_back(Q);
        net.widths.push_back(1);
    }
    net.nodes.resize(net.widths.size());
    net.frozen.resize(net.widths.size());

    for (int s = 0; s < S; ++s) {
        const int l1 = 1 + 3 * s, l2 = l1 + 1, l3 = l1 + 2;
        const int src = net.widths[l1 - 1];
        const int d_eff = std::min(d_star, src);
        // selection layer: frozen perfect-complement mixes of the d* selected
        // inputs (three weight patterns per selected input)
        for (int j = 0; j < 3 * d_star; ++j) {
            NodeParams n;
            n.beta.assign(src, 0.0);
            for (int i = 0; i < d_eff; ++i) {
                n.beta[i] = 1.0 + 0.5 * ((j + 3 * i) % 5);
            }
            n.rho = kNegInf;
            n.tau = 1.0;
            net.nodes[l1].push_back(n);
            net.frozen[l1].push_back(frozen_all(src));
        }
        // middle layer: the free shares, 3 d* Q per stage
        for (int q = 0; q < Q; ++q) {
            NodeParams n;
            n.beta.assign(3 * d_star, 0.0);
            for (int j = 0; j < 3 * d_star; ++j) {
                n.beta[j] = 0.5 + 0.5 * ((q + 2 * j) % 4) / 3.0;
            }
            n.rho = kNegInf;
            n.tau = 1.0;
            net.nodes[l2].push_back(n);
            net.frozen[l2].push_back(frozen_none_beta(3 * d_star));
        }
        // assembly: linear top of the block
        {
            NodeParams n;
            n.beta.assign(Q, 1.0 / Q);
            n.rho = 1.0;
            n.tau = 1.0;
            net.nodes[l3].push_back(n);
            net.frozen[l3].push_back(frozen_all(Q));
        }
    }
    net.output_dir.assign(1, 1.0);
    return net;
}

NetworkSpec build_4l_ces(int S, int input_dim, int Q) {
    require(S >= 1 && Q >= 1 && input_dim >= 1, "build_4l_ces: invalid dimensions");

    NetworkSpec net;
    net.kind = NetKind::production;
    net.widths = {input_dim};
    for (int s = 0; s < S; ++s) {
        net.widths.push_back(Q);
        net.widths.push_back(1);
        net.widths.push_back(Q);
        net.widths.push_back(1);
    }
    net.nodes.resize(net.widths.size());
    net.frozen.resize(net.widths.size());

    for (int s = 0; s < S; ++s) {
        const int base = 1 + 4 * s;
        const int src = net.widths[base - 1];
        for (int q = 0; q < Q; ++q) {  // layer 1: tau frozen, beta/rho free
            NodeParams n;
            n.beta.assign(src, 0.0);
            for (int i = 0; i < src; ++i) n.beta[i] = 0.6 + 0.3 * ((q + i) % 3);
            n.rho = 0.4 + 0.1 * (q % 3);
            n.tau = 1.0;
            NodeFrozen f;
            f.beta.assign(src, 0);
            f.beta0 = true;
            f.rho = false;
            f.tau = true;
            net.nodes[base].push_back(n);
            net.frozen[base].push_back(f);
        }
        {  // layer 2: single linear neuron, rho = tau = 1 frozen, beta free
            NodeParams n;
            n.beta.assign(Q, 1.0 / Q);
            n.rho = 1.0;
            n.tau = 1.0;
            net.nodes[base + 1].push_back(n);
            net.frozen[base + 1].push_back(frozen_none_beta(Q));
        }
        for (int q = 0; q < Q; ++q) {  // layer 3: tau frozen, beta/rho free
            NodeParams n;
            n.beta.assign(1, 0.8 + 0.2 * (q % 3));
            n.rho = 0.5;
            n.tau = 1.0;
            NodeFrozen f;
            f.beta.assign(1, 0);
            f.beta0 = true;
            f.rho = false;
            f.tau = true;
            net.nodes[base + 2].push_back(n);
            net.frozen[base + 2].push_back(f);
        }
        {  // layer 4: single linear neuron, rho = tau = 1 frozen, beta free
            NodeParams n;
            n.beta.assign(Q, 1.0 / Q);
            n.rho = 1.0;
            n.tau = 1.0;
            net.nodes[base + 3].push_back(n);
            net.frozen[base + 3].push_back(frozen_none_beta(Q));
        }
    }
    net.output_dir.assign(1, 1.0);
    return net;
}

NetworkSpec build_ces_sieve(int input_dim, int width, unsigned seed) {
    require(input_dim >= 1 && width >= 1, "build_ces_sieve: invalid dimensions");
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ub(0.5, 1.5);
    NetworkSpec net;
    net.kind = NetKind::production;
    net.widths = {input_dim, width, 1};
    net.nodes.resize(3);
    net.frozen.resize(3);
    for (int k = 0; k < width; ++k) {
        NodeParams n;
        n.beta.resize(input_dim);
        for (double& b : n.beta) b = ub(rng);
        n.rho = 0.5;
        n.tau = 1.0;
        NodeFrozen f;
        f.beta.assign(input_dim, 0);
        f.beta0 = true;
        f.rho = false;
        f.tau = true;
        net.nodes[1].push_back(n);
        net.frozen[1].push_back(f);
    }
    NodeParams top;
    top.beta.assign(width, 1.0 / width);
    top.rho = 1.0;
    top.tau = 1.0;
    net.nodes[2].push_back(top);
    net.frozen[2].push_back(frozen_none_beta(width));
    net.output_dir.assign(1, 1.0);
    // denser dual price lattice for wider sieves
    net.price_lattice = std::min(24, 8 + 2 * width);
    return net;
}

std::vector<SupportPoint> extract_support_points(const Dataset& data, int count) {
    require(!data.is_choice(), "extract_support_points: production data expected");
    data.check();
    require(count >= 1, "extract_support_points: count must be >= 1");
    const int K = static_cast<int>(data.x.front().size());
    // per-direction maxima: for each direction on a deterministic simplex
    // lattice, keep the observation with the highest output per unit of
    // direction-weighted input
    auto dirs = price_lattice(K, std::max(1, count - 1));
    if (static_cast<int>(dirs.size()) > count) dirs.resize(count);
    std::vector<SupportPoint> pts;
    std::vector<int> chosen;
    for (const auto& d : dirs) {
        int best = -1;
        double best_v = -kPosInf;
        for (int i = 0; i < data.n(); ++i) {
            double dx = 0.0;
            for (int k = 0; k < K; ++k) dx += d[k] * data.x[i][k];
            if (dx <= 0.0 || data.y[i][0] <= 0.0) continue;
            const double v = data.y[i][0] / dx;
            if (v > best_v) {
                best_v = v;
                best = i;
            }
        }
        if (best >= 0 && std::find(chosen.begin(), chosen.end(), best) == chosen.end()) {
            chosen.push_back(best);
            pts.push_back({data.y[best], data.x[best]});
        }
    }
    require(!pts.empty(), "extract_support_points: no positive observations");
    return pts;
}

int param_count(const NetworkSpec& net) { return ParamIndex::build(net).size(); }

double vc_bound(int W) { return 2.0 * W * std::log(2.0 * std::exp(1.0)); }

int sieve_width(int n, int d) {
    require(n >= 3, "sieve_width: n must be >= 3");
    require(d >= 1, "sieve_width: d must be >= 1");
    const double w = std::pow(double(n) / std::log(double(n)),
                              double(d) / (4.0 + double(d)));
    return static_cast<int>(std::llround(w));
}

}  // namespace sieve
