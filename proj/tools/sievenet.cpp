// sievenet: batch CLI for structural-sieve networks.
//
// Subcommands:
//   train    --config=FILE [--seed=N] [--out-dir=DIR] [--quiet]
//   simulate --config=FILE [--seed=N] [--out-dir=DIR] [--quiet]
//   approx   --config=FILE [--out-dir=DIR] [--quiet]
//   rates    --config=FILE [--seed=N] [--out-dir=DIR] [--quiet]
//   eval     NET DATA [--config=FILE] [--quiet]
//   inspect  NET
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 training/solve failure.
// Every artifact is written atomically and is byte-identical across reruns
// with the same config and seed. SIEVENET_THREADS is accepted for interface
// compatibility; execution is single-threaded.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "sieve/architect.hpp"
#include "sieve/cnl.hpp"
#include "sieve/io.hpp"
#include "sieve/synth.hpp"
#include "sieve/train.hpp"

using namespace sieve;

namespace {

struct Args {
    std::string cmd;
    std::string config;
    std::string out_dir = ".";
    long seed = -1;  // -1: use config
    bool quiet = false;
    std::vector<std::string> positional;
};

int usage() {
    std::cerr << "usage: sievenet <train|simulate|approx|rates|eval|inspect> [args]\n"
                 "  see README.md for config keys and examples\n";
    return 2;
}

Args parse_args(int argc, char** argv) {
    Args a;
    if (argc < 2) throw std::invalid_argument("missing subcommand");
    a.cmd = argv[1];
    for (int i = 2; i < argc; ++i) {
        const std::string s = argv[i];
        if (s.rfind("--config=", 0) == 0) {
            a.config = s.substr(9);
        } else if (s.rfind("--seed=", 0) == 0) {
            a.seed = std::stol(s.substr(7));
        } else if (s.rfind("--out-dir=", 0) == 0) {
            a.out_dir = s.substr(10);
        } else if (s == "--quiet") {
            a.quiet = true;
        } else if (s.rfind("--", 0) == 0) {
            throw std::invalid_argument("unknown flag " + s);
        } else {
            a.positional.push_back(s);
        }
    }
    const char* th = std::getenv("SIEVENET_THREADS");
    if (th && std::atoi(th) < 1) throw std::invalid_argument("SIEVENET_THREADS must be >= 1");
    return a;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

unsigned effective_seed(const Config& cfg, const Args& a) {
    return a.seed >= 0 ? static_cast<unsigned>(a.seed)
                       : static_cast<unsigned>(cfg.integer("seed", 1));
}

TrainConfig train_config(const Config& cfg, unsigned seed) {
    TrainConfig tc;
    tc.lr = cfg.num("lr", 0.05);
    tc.batch = cfg.integer("batch", 0);
    tc.epochs = cfg.integer("epochs", 80);
    const std::string opt = cfg.get("optimizer", "adam");
    if (opt == "plain") {
        tc.optimizer = Optimizer::plain_gradient;
    } else if (opt == "momentum") {
        tc.optimizer = Optimizer::momentum;
    } else if (opt == "adam") {
        tc.optimizer = Optimizer::adaptive_moment;
    } else {
        throw std::invalid_argument("config: unknown optimizer " + opt);
    }
    tc.bound_b = cfg.num("bound_b", 0.0);
    tc.rho_min = cfg.num("rho_min", -10.0);
    tc.rho_max = cfg.num("rho_max", 30.0);
    tc.seed = seed;
    tc.val_split = cfg.num("val_split", 0.2);
    tc.convergence_window = cfg.integer("convergence_window", 0);
    tc.halve_on_increase = cfg.integer("halve_on_increase", 1) != 0;
    return tc;
}

Dataset load_dataset(const Config& cfg, const std::string& path, bool choice) {
    const CsvTable t = read_csv(path);
    auto x_cols = cfg.str_list("x_cols");
    auto y_cols = cfg.str_list("y_cols");
    auto price_cols = cfg.str_list("price_cols");
    std::string label_col = cfg.get("label_col", "");
    if (x_cols.empty()) {  // canonical roles from our own simulate output
        for (const auto& h : t.header) {
            if (h.rfind('x', 0) == 0) x_cols.push_back(h);
            if (h.rfind('y', 0) == 0) y_cols.push_back(h);
        }
        if (t.col("label") >= 0) label_col = "label";
    }
    if (choice) {
        require(!label_col.empty(), "config: label_col required for choice data");
        return dataset_from_csv(t, x_cols, {}, label_col, price_cols);
    }
    return dataset_from_csv(t, x_cols, y_cols, "", price_cols);
}

Frontier truth_from_config(const Config& cfg, int* n_inputs) {
    const std::string truth = cfg.get("truth", "ces");
    if (truth == "cobb_douglas") {
        auto alpha = cfg.num_list("alpha");
        require(!alpha.empty(), "config: cobb_douglas truth needs alpha");
        *n_inputs = static_cast<int>(alpha.size());
        return cobb_douglas_frontier(alpha, cfg.num("scale", 1.0));
    }
    if (truth == "ces") {
        CesParams p;
        p.beta = cfg.num_list("beta");
        require(!p.beta.empty(), "config: ces truth needs beta");
        p.rho = cfg.num("rho", 0.5);
        p.tau = cfg.num("tau", 1.0);
        p.beta0 = cfg.num("beta0", 0.0);
        *n_inputs = static_cast<int>(p.beta.size());
        return ces_frontier(p);
    }
    if (truth == "two_layer") {
        const std::string path = cfg.get("truth_net", "");
        require(!path.empty(), "config: two_layer truth needs truth_net");
        NetworkSpec net = load_network_file(path);
        *n_inputs = net.widths.front();
        return network_frontier(std::move(net));
    }
    throw std::invalid_argument("config: unknown truth " + truth);
}

NetworkSpec builder_from_config(const Config& cfg) {
    const std::string b = cfg.get("builder", "");
    if (b == "two_stage") {
        const std::string data = cfg.get("data", "");
        require(!data.empty(), "config: two_stage builder needs data");
        const Dataset d = dataset_from_csv(read_csv(data), cfg.str_list("x_cols"),
                                           cfg.str_list("y_cols"), "", {});
        return build_two_stage_production(
            extract_support_points(d, cfg.integer("support_count", 16)));
    }
    if (b == "cnl_grid") {
        const std::string oracle = cfg.get("oracle", "logit");
        require(oracle == "logit", "config: cnl_grid supports the logit oracle");
        auto sum_f = [](const std::vector<double>& w) {
            double s = 0.0;
            for (double v : w) s += v;
            return s;
        };
        return build_cnl_grid_approximator(sum_f, cfg.integer("M", 2),
                                           cfg.integer("L", 8),
                                           cfg.integer("dense_subsets", 0) != 0);
    }
    if (b == "sp_ces") {
        return build_sp_ces(cfg.integer("S", 1), cfg.integer("d_star", 2),
                            cfg.integer("Q", 8), cfg.integer("input_dim", 2));
    }
    if (b == "4l_ces") {
        return build_4l_ces(cfg.integer("S", 1), cfg.integer("input_dim", 2),
                            cfg.integer("Q", 8));
    }
    if (b == "ces_sieve") {
        return build_ces_sieve(cfg.integer("input_dim", 2), cfg.integer("width", 6),
                               static_cast<unsigned>(cfg.integer("seed", 1)));
    }
    throw std::invalid_argument("config: unknown builder '" + b + "'");
}

std::string metrics_text(const NetworkSpec& net, const Metrics& m) {
    std::ostringstream os;
    os << "# sievenet-metrics 1\n";
    os << "mean_loss " << format_g17(m.mean_loss) << "\n";
    if (net.kind == NetKind::choice) {
        os << "accuracy " << format_g17(m.accuracy) << "\n";
        for (size_t a = 0; a < m.calibration.size(); ++a) {
            os << "calibration_" << a + 1 << " " << format_g17(m.calibration[a]) << "\n";
        }
    } else {
        for (size_t o = 0; o < m.rmse.size(); ++o) {
            os << "rmse_" << o + 1 << " " << format_g17(m.rmse[o]) << "\n";
        }
    }
    return os.str();
}

int cmd_train(const Args& a) {
    const Config cfg = load_config(a.config);
    const unsigned seed = effective_seed(cfg, a);
    const std::string kind = cfg.get("kind", "production");
    const bool choice = kind == "choice";
    require(choice || kind == "production", "config: kind must be production or choice");

    NetworkSpec net;
    if (cfg.has("net")) {
        net = load_network_file(cfg.get("net"));
    } else if (cfg.has("builder")) {
        net = builder_from_config(cfg);
    } else {
        throw std::invalid_argument("config: train needs net or builder");
    }

    const std::string data_path = cfg.get("data", "");
    require(!data_path.empty(), "config: missing data");
    if (!std::filesystem::exists(data_path)) {
        std::cerr << "sievenet: data file not found: " << data_path << "\n";
        return 3;
    }
    Dataset data;
    try {
        data = load_dataset(cfg, data_path, choice);
    } catch (const std::exception& e) {
        std::cerr << "sievenet: data error: " << e.what() << "\n";
        return 3;
    }

    const TrainConfig tc = train_config(cfg, seed);
    FitResult res;
    try {
        res = fit(net, data, tc);
    } catch (const std::exception& e) {
        std::cerr << "sievenet: training failed: " << e.what() << "\n";
        return 4;
    }

    std::filesystem::create_directories(a.out_dir);
    save_network_file(res.net, join_path(a.out_dir, "trained.net"));
    std::ostringstream hist;
    hist << "# sievenet-history 1\n";
    for (const auto& st : res.history) hist << format_epoch(st) << "\n";
    atomic_write(join_path(a.out_dir, "history.log"), hist.str());
    const Metrics m = evaluate(res.net, data, tc.bound_b);
    atomic_write(join_path(a.out_dir, "metrics.txt"), metrics_text(res.net, m));
    atomic_write(join_path(a.out_dir, "config_echo.txt"), cfg.raw);
    if (!a.quiet) {
        std::cout << "train: " << res.history.size() << " epochs, final "
                  << format_epoch(res.history.back()) << "\n"
                  << "mean_loss " << format_g17(m.mean_loss) << "\n";
    }
    return 0;
}

int cmd_simulate(const Args& a) {
    const Config cfg = load_config(a.config);
    const unsigned seed = effective_seed(cfg, a);
    const std::string kind = cfg.get("kind", "production");
    const int n = cfg.integer("n", 1000);
    Dataset d;
    if (kind == "production") {
        int n_inputs = 0;
        const Frontier f = truth_from_config(cfg, &n_inputs);
        d = sample_production(f, n_inputs, n, cfg.num("noise_sd", 0.05), seed,
                              cfg.num("box_lo", 0.5), cfg.num("box_hi", 2.0));
    } else if (kind == "choice") {
        const std::string path = cfg.get("net", "");
        require(!path.empty(), "config: choice simulation needs net");
        const NetworkSpec net = load_network_file(path);
        d = simulate_choices(net, n, seed, cfg.num("u_lo", -2.0), cfg.num("u_hi", 2.0));
    } else {
        throw std::invalid_argument("config: kind must be production or choice");
    }
    std::filesystem::create_directories(a.out_dir);
    write_csv(join_path(a.out_dir, cfg.get("out_data", "data.csv")), dataset_to_csv(d));
    atomic_write(join_path(a.out_dir, "config_echo.txt"), cfg.raw);
    if (!a.quiet) std::cout << "simulate: " << d.n() << " rows\n";
    return 0;
}

int cmd_eval(const Args& a) {
    require(a.positional.size() == 2, "eval needs NET and DATA paths");
    if (!std::filesystem::exists(a.positional[1])) {
        std::cerr << "sievenet: data file not found: " << a.positional[1] << "\n";
        return 3;
    }
    const NetworkSpec net = load_network_file(a.positional[0]);
    Config cfg;
    if (!a.config.empty()) cfg = load_config(a.config);
    Dataset data;
    try {
        data = load_dataset(cfg, a.positional[1], net.kind == NetKind::choice);
    } catch (const std::exception& e) {
        std::cerr << "sievenet: data error: " << e.what() << "\n";
        return 3;
    }
    const Metrics m = evaluate(net, data, cfg.num("bound_b", 0.0));
    double max_abs = 0.0;
    if (net.kind == NetKind::production) {
        for (int i = 0; i < data.n(); ++i) {
            const auto pred = predict_outputs(net, data.x[i]);
            for (size_t o = 0; o < pred.size(); ++o) {
                max_abs = std::max(max_abs, std::fabs(pred[o] - data.y[i][o]));
            }
        }
    }
    std::cout << metrics_text(net, m);
    if (net.kind == NetKind::production) {
        std::cout << "max_abs_err " << format_g17(max_abs) << "\n";
    }
    return 0;
}

int cmd_approx(const Args& a) {
    const Config cfg = load_config(a.config);
    const NetworkSpec net = builder_from_config(cfg);
    std::filesystem::create_directories(a.out_dir);
    save_network_file(net, join_path(a.out_dir, cfg.get("out_net", "approx.net")));
    atomic_write(join_path(a.out_dir, "config_echo.txt"), cfg.raw);
    if (!a.quiet) {
        std::cout << "approx: built " << cfg.get("builder") << " network, W = "
                  << param_count(net) << "\n";
    }
    return 0;
}

int cmd_inspect(const Args& a) {
    require(a.positional.size() == 1, "inspect needs a NET path");
    const NetworkSpec net = load_network_file(a.positional[0]);
    const int W = param_count(net);
    std::cout << "kind " << (net.kind == NetKind::production ? "production" : "choice")
              << "\n";
    std::cout << "widths";
    for (int w : net.widths) std::cout << " " << w;
    std::cout << "\n";
    std::cout << "param_count " << W << "\n";
    std::cout << "vc_bound " << format_g17(vc_bound(W)) << "\n";
    const auto diags = validate(net);
    if (diags.empty()) {
        std::cout << "constraints ok\n";
    } else {
        for (const auto& d : diags) std::cout << "violation " << d << "\n";
    }
    return 0;
}

int cmd_rates(const Args& a) {
    const Config cfg = load_config(a.config);
    const unsigned seed = effective_seed(cfg, a);
    const auto ladder = cfg.int_list("n_ladder");
    require(!ladder.empty(), "config: rates needs n_ladder");
    int n_inputs = 0;
    const Frontier truth = truth_from_config(cfg, &n_inputs);
    const int d = cfg.integer("rate_d", n_inputs);
    const int test_n = cfg.integer("test_n", 2000);
    const double noise = cfg.num("noise_sd", 0.05);

    TrainConfig tc = train_config(cfg, seed);
    CsvTable out;
    out.header = {"n", "width", "test_mse"};
    std::vector<double> ln_n, ln_mse;
    for (size_t i = 0; i < ladder.size(); ++i) {
        const int n = ladder[i];
        const unsigned s_i = seed + 1000003u * static_cast<unsigned>(i);
        const Dataset train_d = sample_production(truth, n_inputs, n, noise, s_i,
                                                  cfg.num("box_lo", 0.5),
                                                  cfg.num("box_hi", 2.0));
        const Dataset test_d = sample_production(truth, n_inputs, test_n, noise,
                                                 s_i + 777u, cfg.num("box_lo", 0.5),
                                                 cfg.num("box_hi", 2.0));
        const int width = sieve_width(n, d);
        const NetworkSpec net = build_ces_sieve(n_inputs, width, seed + 31u * i);
        FitResult res;
        try {
            res = fit(net, train_d, tc);
        } catch (const std::exception& e) {
            std::cerr << "sievenet: training failed at n = " << n << ": " << e.what()
                      << "\n";
            return 4;
        }
        const Metrics m = evaluate(res.net, test_d, tc.bound_b);
        out.rows.push_back({std::to_string(n), std::to_string(width),
                            format_g17(m.mean_loss)});
        ln_n.push_back(std::log(double(n)));
        ln_mse.push_back(std::log(m.mean_loss));
        if (!a.quiet) {
            std::cout << "rates: n=" << n << " width=" << width << " test_mse="
                      << format_g17(m.mean_loss) << "\n";
        }
    }
    std::filesystem::create_directories(a.out_dir);
    write_csv(join_path(a.out_dir, "rates.csv"), out);

    std::ostringstream rep;
    rep << "# sievenet-rates 1\n";
    if (ladder.size() >= 3) {
        const int n = static_cast<int>(ln_n.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = 0; i < n; ++i) {
            sx += ln_n[i];
            sy += ln_mse[i];
            sxx += ln_n[i] * ln_n[i];
            sxy += ln_n[i] * ln_mse[i];
        }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        const double icpt = (sy - slope * sx) / n;
        double rss = 0, sxx_c = 0;
        const double xbar = sx / n;
        for (int i = 0; i < n; ++i) {
            rss += sqr(ln_mse[i] - icpt - slope * ln_n[i]);
            sxx_c += sqr(ln_n[i] - xbar);
        }
        const double se = std::sqrt(rss / std::max(1, n - 2) / sxx_c);
        rep << "slope " << format_g17(slope) << "\n";
        rep << "slope_se " << format_g17(se) << "\n";
    }
    atomic_write(join_path(a.out_dir, "rates_report.txt"), rep.str());
    atomic_write(join_path(a.out_dir, "config_echo.txt"), cfg.raw);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Args a;
    try {
        a = parse_args(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "sievenet: " << e.what() << "\n";
        return usage();
    }
    try {
        if (a.cmd == "train") return cmd_train(a);
        if (a.cmd == "simulate") return cmd_simulate(a);
        if (a.cmd == "eval") return cmd_eval(a);
        if (a.cmd == "approx") return cmd_approx(a);
        if (a.cmd == "inspect") return cmd_inspect(a);
        if (a.cmd == "rates") return cmd_rates(a);
        std::cerr << "sievenet: unknown subcommand " << a.cmd << "\n";
        return usage();
    } catch (const SolveError& e) {
        std::cerr << "sievenet: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "sievenet: " << e.what() << "\n";
        return 2;
    }
}
