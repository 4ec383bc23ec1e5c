#include "sieve/network.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sieve {

namespace {

std::string at(int s, int k) {
    return "layer " + std::to_string(s) + " node " + std::to_string(k);
}

// Source layer a parameterized node draws on: below for production, above for
// choice.
int source_layer(const NetworkSpec& net, int s) {
    return net.kind == NetKind::production ? s - 1 : s + 1;
}

}  // namespace

std::vector<std::string> validate(const NetworkSpec& net) {
    std::vector<std::string> diags;
    const int S = net.depth();
    if (S < 1) {
        diags.push_back("network needs at least two layers");
        return diags;
    }
    for (int s = 0; s <= S; ++s) {
        if (net.widths[s] < 1) diags.push_back("layer " + std::to_string(s) + " has width 0");
    }
    if (net.nodes.size() != net.widths.size() || net.frozen.size() != net.widths.size()) {
        diags.push_back("node/frozen tables not aligned with widths");
        return diags;
    }

    const bool prod = net.kind == NetKind::production;
    if (!prod && net.widths[0] != 1) diags.push_back("multiple roots");
    const int lo = prod ? 1 : 0;
    const int hi = prod ? S : S - 1;

    for (int s = lo; s <= hi; ++s) {
        if (static_cast<int>(net.nodes[s].size()) != net.widths[s]) {
            diags.push_back("layer " + std::to_string(s) + " node count != width");
            continue;
        }
        if (net.frozen[s].size() != net.nodes[s].size()) {
            diags.push_back("layer " + std::to_string(s) + " frozen mask count != width");
            continue;
        }
        const int src = net.widths[source_layer(net, s)];
        std::vector<int> covered(src, 0);
        for (int k = 0; k < net.widths[s]; ++k) {
            const NodeParams& n = net.nodes[s][k];
            if (static_cast<int>(n.beta.size()) != src) {
                diags.push_back(at(s, k) + ": share vector length mismatch");
                continue;
            }
            if (net.frozen[s][k].beta.size() != n.beta.size()) {
                diags.push_back(at(s, k) + ": frozen mask length mismatch");
            }
            bool any = n.beta0 > 0.0;
            for (int l = 0; l < src; ++l) {
                if (!(n.beta[l] >= 0.0) || !std::isfinite(n.beta[l])) {
                    diags.push_back(at(s, k) + ": negative share weight");
                }
                if (n.beta[l] > 0.0) {
                    any = true;
                    covered[l] = 1;
                }
            }
            if (!any) diags.push_back(at(s, k) + ": all share weights zero");
            if (prod) {
                if (n.beta0 < 0.0) diags.push_back(at(s, k) + ": negative beta0");
                if (n.rho > 1.0 + kRhoLinearEps) {
                    diags.push_back(at(s, k) + ": convexity bound violated (rho > 1)");
                }
                if (!(n.tau > 0.0) || n.tau > 1.0 + 1e-12) {
                    diags.push_back(at(s, k) + ": tau outside (0, 1]");
                }
            } else {
                if (n.rho < 1.0 - kRhoLinearEps) {
                    diags.push_back(at(s, k) + ": nesting coefficient below 1");
                }
            }
        }
        if (!prod) {
            for (int l = 0; l < src; ++l) {
                if (!covered[l]) {
                    diags.push_back("layer " + std::to_string(s + 1) + " node " +
                                    std::to_string(l) + " unreachable (no positive weight)");
                }
            }
        }
    }

    if (prod) {
        if (!net.output_dir.empty()) {
            if (static_cast<int>(net.output_dir.size()) != net.widths[S]) {
                diags.push_back("output_dir length != K_S");
            } else {
                bool any = false;
                for (double u : net.output_dir) {
                    if (u < 0.0) diags.push_back("output_dir has a negative entry");
                    any = any || u > 0.0;
                }
                if (!any) diags.push_back("output_dir has no positive entry");
            }
        }
        if (net.pi0 < 0.0) diags.push_back("pi0 negative");
    }
    return diags;
}

bool is_two_stage_polytope(const NetworkSpec& net) {
    if (net.kind != NetKind::production || net.depth() != 2) return false;
    for (const NodeParams& n : net.nodes[1]) {
        if (!(n.rho < kRhoLeontief) || std::fabs(n.tau - 1.0) > 1e-12) return false;
    }
    for (const NodeParams& n : net.nodes[2]) {
        if (std::fabs(n.rho - 1.0) > kRhoLinearEps || std::fabs(n.tau - 1.0) > 1e-12 ||
            n.beta0 != 0.0) {
            return false;
        }
    }
    return true;
}

bool is_constant_returns(const NetworkSpec& net) {
    if (net.kind != NetKind::production) return false;
    for (int s = 1; s <= net.depth(); ++s) {
        for (const NodeParams& n : net.nodes[s]) {
            if (std::fabs(n.tau - 1.0) > 1e-12 || n.beta0 != 0.0) return false;
        }
    }
    return true;
}

// --- serialization ----------------------------------------------------------

namespace {

std::string fmt(double x) {
    if (x == kPosInf) return "inf";
    if (x == kNegInf) return "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

double parse_double(const std::string& tok) {
    if (tok == "inf") return kPosInf;
    if (tok == "-inf") return kNegInf;
    return std::stod(tok);
}

}  // namespace

std::string save_network(const NetworkSpec& net) {
    std::ostringstream os;
    os << "sievenet 1\n";
    os << "kind " << (net.kind == NetKind::production ? "production" : "choice") << "\n";
    os << "widths";
    for (int w : net.widths) os << " " << w;
    os << "\n";
    os << "pi0 " << fmt(net.pi0) << "\n";
    os << "lattice " << net.price_lattice << "\n";
    os << "output_dir";
    for (double u : net.output_dir) os << " " << fmt(u);
    os << "\n";
    for (int s = 0; s < static_cast<int>(net.nodes.size()); ++s) {
        for (int k = 0; k < static_cast<int>(net.nodes[s].size()); ++k) {
            const NodeParams& n = net.nodes[s][k];
            const NodeFrozen& f = net.frozen[s][k];
            os << "node " << s << " " << k << "\n";
            os << "beta";
            for (double b : n.beta) os << " " << fmt(b);
            os << "\n";
            os << "beta0 " << fmt(n.beta0) << "\n";
            os << "rho " << fmt(n.rho) << "\n";
            os << "tau " << fmt(n.tau) << "\n";
            os << "frozen_beta";
            for (std::uint8_t b : f.beta) os << " " << int(b);
            os << "\n";
            os << "frozen " << int(f.beta0) << " " << int(f.rho) << " " << int(f.tau) << "\n";
        }
    }
    return os.str();
}

NetworkSpec load_network(const std::string& text) {
    std::istringstream is(text);
    std::string word;
    NetworkSpec net;
    require(bool(is >> word) && word == "sievenet", "load_network: bad magic");
    int version = 0;
    is >> version;
    require(version == 1, "load_network: unsupported version");

    int cur_s = -1, cur_k = -1;
    auto node = [&]() -> NodeParams& {
        require(cur_s >= 0, "load_network: field before node header");
        return net.nodes[cur_s][cur_k];
    };
    auto froz = [&]() -> NodeFrozen& { return net.frozen[cur_s][cur_k]; };

    while (is >> word) {
        if (word == "kind") {
            std::string k;
            is >> k;
            require(k == "production" || k == "choice", "load_network: unknown kind");
            net.kind = k == "production" ? NetKind::production : NetKind::choice;
        } else if (word == "widths") {
            std::string line;
            std::getline(is, line);
            std::istringstream ls(line);
            int w;
            while (ls >> w) net.widths.push_back(w);
            net.nodes.resize(net.widths.size());
            net.frozen.resize(net.widths.size());
            const int lo = net.kind == NetKind::production ? 1 : 0;
            const int hi = net.kind == NetKind::production ? net.depth() : net.depth() - 1;
            for (int s = lo; s <= hi; ++s) {
                net.nodes[s].resize(net.widths[s]);
                net.frozen[s].resize(net.widths[s]);
            }
        } else if (word == "pi0") {
            is >> word;
            net.pi0 = parse_double(word);
        } else if (word == "lattice") {
            is >> net.price_lattice;
        } else if (word == "output_dir") {
            std::string line;
            std::getline(is, line);
            std::istringstream ls(line);
            std::string tok;
            while (ls >> tok) net.output_dir.push_back(parse_double(tok));
        } else if (word == "node") {
            is >> cur_s >> cur_k;
            require(cur_s >= 0 && cur_s < static_cast<int>(net.nodes.size()) && cur_k >= 0 &&
                        cur_k < static_cast<int>(net.nodes[cur_s].size()),
                    "load_network: node index out of range");
        } else if (word == "beta") {
            std::string line;
            std::getline(is, line);
            std::istringstream ls(line);
            std::string tok;
            node().beta.clear();
            while (ls >> tok) node().beta.push_back(parse_double(tok));
        } else if (word == "beta0") {
            is >> word;
            node().beta0 = parse_double(word);
        } else if (word == "rho") {
            is >> word;
            node().rho = parse_double(word);
        } else if (word == "tau") {
            is >> word;
            node().tau = parse_double(word);
        } else if (word == "frozen_beta") {
            std::string line;
            std::getline(is, line);
            std::istringstream ls(line);
            int b;
            froz().beta.clear();
            while (ls >> b) froz().beta.push_back(static_cast<std::uint8_t>(b));
        } else if (word == "frozen") {
            int b0, r, t;
            is >> b0 >> r >> t;
            froz().beta0 = b0;
            froz().rho = r;
            froz().tau = t;
        } else {
            throw std::invalid_argument("load_network: unknown field '" + word + "'");
        }
    }
    require(!net.widths.empty(), "load_network: missing widths");
    return net;
}

void save_network_file(const NetworkSpec& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(bool(os), "save_network_file: cannot open " + path);
    os << save_network(net);
}

NetworkSpec load_network_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), "load_network_file: cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return load_network(ss.str());
}

}  // namespace sieve
