// SPDX-License-Identifier: Apache-2.0
//
// rfsolve: drives sampling, inversion, training, and the study harness
// from the command line. Every subcommand is deterministic given its
// flags and seed.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "rfsolve/attention.hpp"
#include "rfsolve/field.hpp"
#include "rfsolve/harness.hpp"
#include "rfsolve/mlp.hpp"
#include "rfsolve/rng.hpp"
#include "rfsolve/solver.hpp"
#include "rfsolve/tensor.hpp"

namespace fs = std::filesystem;
using namespace rfsolve;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything a run can configure; flags override config-file values.
struct Options {
    std::string command;
    std::string field = "linear-state";
    double a = 1.0;
    double omega = 1.0;
    int dim = 2;
    int intervals = 25;
    int order = 2;
    double delta_t = 0.01;
    std::uint64_t seed = 0;
    int n_share = -1;  // -1: full sweep in edit-study
    int m_share = 1;
    int total_nfe = 120;
    std::vector<int> steps = {10, 20, 40, 80, 160};
    std::vector<int> orders = {1, 2};
    std::uint32_t source_cond = 0;
    std::uint32_t target_cond = 1;
    int train_steps = 2000;
    int batch = 64;
    double lr = 1e-3;
    std::string dist = "mixture";
    std::string model_dir;
    std::string input;
    std::string out_dir;
};

const std::map<std::string, int>& config_keys() {
    static const std::map<std::string, int> keys = {
        {"command", 0},   {"field", 0},     {"a", 0},          {"omega", 0},
        {"dim", 0},       {"n", 0},         {"order", 0},      {"delta-t", 0},
        {"seed", 0},      {"n-share", 0},   {"m-share", 0},    {"total-nfe", 0},
        {"steps", 0},     {"orders", 0},    {"source-cond", 0}, {"target-cond", 0},
        {"train-steps", 0}, {"batch", 0},   {"lr", 0},         {"dist", 0},
        {"model", 0},     {"input", 0},     {"out", 0}};
    return keys;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void load_config_file(const std::string& path, Options& opt) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (!config_keys().count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        try {
            if (key == "command") opt.command = val;
            else if (key == "field") opt.field = val;
            else if (key == "a") opt.a = std::stod(val);
            else if (key == "omega") opt.omega = std::stod(val);
            else if (key == "dim") opt.dim = std::stoi(val);
            else if (key == "n") opt.intervals = std::stoi(val);
            else if (key == "order") opt.order = std::stoi(val);
            else if (key == "delta-t") opt.delta_t = std::stod(val);
            else if (key == "seed") opt.seed = std::stoull(val);
            else if (key == "n-share") opt.n_share = std::stoi(val);
            else if (key == "m-share") opt.m_share = std::stoi(val);
            else if (key == "total-nfe") opt.total_nfe = std::stoi(val);
            else if (key == "steps") opt.steps = parse_int_list(val);
            else if (key == "orders") opt.orders = parse_int_list(val);
            else if (key == "source-cond") opt.source_cond = std::stoul(val);
            else if (key == "target-cond") opt.target_cond = std::stoul(val);
            else if (key == "train-steps") opt.train_steps = std::stoi(val);
            else if (key == "batch") opt.batch = std::stoi(val);
            else if (key == "lr") opt.lr = std::stod(val);
            else if (key == "dist") opt.dist = val;
            else if (key == "model") opt.model_dir = val;
            else if (key == "input") opt.input = val;
            else if (key == "out") opt.out_dir = val;
        } catch (const std::invalid_argument&) {
            throw ConfigError("config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
        }
    }
}

std::unique_ptr<VelocityField> make_field(const Options& opt) {
    if (opt.field == "constant") {
        Tensor c = Tensor::zeros({static_cast<std::size_t>(opt.dim)});
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = opt.a;
        return std::make_unique<ConstantField>(std::move(c));
    }
    if (opt.field == "linear-state")
        return std::make_unique<LinearStateField>(opt.a, opt.dim);
    if (opt.field == "linear-time") return std::make_unique<LinearTimeField>(opt.dim);
    if (opt.field == "quadratic-time") return std::make_unique<QuadraticTimeField>(opt.dim);
    if (opt.field == "rotation") return std::make_unique<RotationField>(opt.omega);
    if (opt.field == "gaussian-pair") {
        std::size_t d = opt.dim;
        Tensor mu0 = Tensor::zeros({d}), sigma0 = Tensor::zeros({d}), mu1 = Tensor::zeros({d});
        for (std::size_t i = 0; i < d; ++i) {
            mu0[i] = 2.0;
            sigma0[i] = 0.5;
            mu1[i] = 0.0;
        }
        return std::make_unique<GaussianPairField>(mu0, sigma0, mu1);
    }
    if (opt.field == "mlp") {
        if (opt.model_dir.empty())
            throw ConfigError("field 'mlp' requires --model <dir> with trained parameters");
        return std::make_unique<MlpField>(load_mlp(opt.model_dir));
    }
    if (opt.field == "attention")
        return std::make_unique<AttentionField>(4, 8, 2, opt.seed);
    throw ConfigError("unknown field '" + opt.field + "'");
}

const AnalyticField& require_analytic(const VelocityField& f) {
    const auto* a = dynamic_cast<const AnalyticField*>(&f);
    if (!a) throw ConfigError("this study needs an analytic field with an exact solution");
    return *a;
}

Tensor initial_state(const Options& opt, const VelocityField& field) {
    if (!opt.input.empty()) {
        Tensor z = read_tensor(opt.input);
        if (z.size() != field.dim()) throw ConfigError("--input tensor size does not match field");
        return z;
    }
    Rng rng(opt.seed);
    Tensor z = Tensor::zeros({field.dim()});
    for (double& v : z.data) v = rng.normal();
    return z;
}

fs::path out_dir(const Options& opt) {
    if (!opt.out_dir.empty()) return opt.out_dir;
    if (const char* env = std::getenv("RFSOLVE_OUT")) return env;
    return ".";
}

std::string out_stem(const Options& opt, const std::string& command) {
    return command + "-" + opt.field + "-" + std::to_string(opt.order) + "-" +
           std::to_string(opt.intervals);
}

void write_trajectory_outputs(const Options& opt, const std::string& command,
                              const TrajectoryResult& run) {
    fs::path dir = out_dir(opt);
    fs::create_directories(dir);
    std::string stem = out_stem(opt, command);
    write_tensor(run.final_state, (dir / (stem + ".rft")).string());
    std::vector<double> norms;
    for (const auto& s : run.record.states) norms.push_back(l2_norm(s));
    write_csv({{"study", command},
               {"field", opt.field},
               {"order", std::to_string(opt.order)},
               {"n", std::to_string(opt.intervals)},
               {"seed", std::to_string(opt.seed)}},
              {{"t", run.record.step_times}, {"state_norm", norms}},
              (dir / (stem + ".csv")).string());
    std::cout << "wrote " << (dir / (stem + ".csv")).string() << "\n";
}

int run(Options& opt) {
    if (opt.command == "sample" || opt.command == "invert") {
        auto field = make_field(opt);
        Tensor z = initial_state(opt, *field);
        SolverConfig cfg{opt.order, opt.delta_t,
                         opt.command == "invert" ? Direction::Invert : Direction::Denoise};
        TrajectoryResult run = run_trajectory(*field, z, TimeGrid::uniform(opt.intervals), cfg);
        write_trajectory_outputs(opt, opt.command, run);
        return 0;
    }
    if (opt.command == "roundtrip") {
        auto field = make_field(opt);
        Tensor z0 = initial_state(opt, *field);
        TimeGrid grid = TimeGrid::uniform(opt.intervals);
        SolverConfig inv{opt.order, opt.delta_t, Direction::Invert};
        Tensor noise = run_trajectory(*field, z0, grid, inv, {}, false).final_state;
        SolverConfig den{opt.order, opt.delta_t, Direction::Denoise};
        Tensor back = run_trajectory(*field, noise, grid, den, {}, false).final_state;
        double err = mse(z0, back);
        fs::path dir = out_dir(opt);
        fs::create_directories(dir);
        std::string path = (dir / (out_stem(opt, "roundtrip") + ".csv")).string();
        write_csv({{"study", "roundtrip"},
                   {"field", opt.field},
                   {"order", std::to_string(opt.order)},
                   {"n", std::to_string(opt.intervals)},
                   {"seed", std::to_string(opt.seed)}},
                  {{"mse", {err}}}, path);
        std::cout << "roundtrip mse " << format_double(err) << "\nwrote " << path << "\n";
        return 0;
    }
    if (opt.command == "train") {
        ToyDistribution dist =
            opt.dist == "two-moons"    ? ToyDistribution::two_moons(0.05)
            : opt.dist == "checkerboard" ? ToyDistribution::checkerboard(4)
            : opt.dist == "mixture"
                ? ToyDistribution::gaussian_mixture(
                      {{{-2.0, 0.0}, {0.4, 0.4}, 0.5}, {{2.0, 0.0}, {0.4, 0.4}, 0.5}})
                : throw ConfigError("unknown dist '" + opt.dist + "'");
        Rng init_rng(opt.seed);
        MlpField field(2, {64, 64, 64}, init_rng);
        TrainConfig cfg;
        cfg.batch_size = opt.batch;
        cfg.steps = opt.train_steps;
        cfg.learning_rate = opt.lr;
        cfg.seed = opt.seed + 1;
        TrainResult result = train(field, dist, cfg);
        fs::path dir = out_dir(opt);
        fs::create_directories(dir);
        std::string model_dir = opt.model_dir.empty()
                                    ? (dir / ("mlp-" + opt.dist + "-" + std::to_string(opt.seed)))
                                          .string()
                                    : opt.model_dir;
        save_mlp(field, model_dir);
        std::vector<double> step_axis(result.loss_curve.size());
        for (std::size_t i = 0; i < step_axis.size(); ++i) step_axis[i] = double(i);
        std::string path = (dir / ("train-" + opt.dist + "-" + std::to_string(opt.seed) + ".csv"))
                               .string();
        write_csv({{"study", "train"},
                   {"dist", opt.dist},
                   {"seed", std::to_string(opt.seed)},
                   {"model", fs::path(model_dir).filename().string()}},
                  {{"step", step_axis}, {"loss", result.loss_curve}}, path);
        std::cout << "final loss " << format_double(result.loss_curve.back()) << "\nwrote "
                  << path << "\nmodel " << model_dir << "\n";
        return 0;
    }
    if (opt.command == "fig2") {
        auto field = make_field(opt);
        Tensor z0 = initial_state(opt, *field);
        auto curves = fig2_study(*field, z0, opt.intervals, opt.orders, {}, true, opt.delta_t,
                                 opt.field);
        fs::path dir = out_dir(opt);
        fs::create_directories(dir);
        std::string path = (dir / (out_stem(opt, "fig2") + ".csv")).string();
        write_error_curves_csv(curves, path, opt.seed);
        std::cout << "wrote " << path << "\n";
        return 0;
    }
    if (opt.command == "converge") {
        auto field = make_field(opt);
        const AnalyticField& analytic = require_analytic(*field);
        Tensor z0 = initial_state(opt, *field);
        ConvergenceReport report = convergence_study(analytic, z0, Direction::Denoise, opt.order,
                                                     opt.steps, opt.delta_t);
        fs::path dir = out_dir(opt);
        fs::create_directories(dir);
        std::string path = (dir / (out_stem(opt, "converge") + ".csv")).string();
        write_convergence_csv(report, path, opt.seed);
        std::cout << "slope " << (report.exact ? "exact" : format_double(report.slope))
                  << "\nwrote " << path << "\n";
        return 0;
    }
    if (opt.command == "nfe-ablation") {
        auto field = make_field(opt);
        Tensor z0 = initial_state(opt, *field);
        auto rows = nfe_ablation(*field, z0, opt.total_nfe, {1, 2, 3}, {}, opt.delta_t);
        fs::path dir = out_dir(opt);
        fs::create_directories(dir);
        std::string path = (dir / ("nfe-ablation-" + opt.field + "-" +
                                   std::to_string(opt.total_nfe) + ".csv"))
                               .string();
        write_ablation_csv(rows, path, opt.field, opt.total_nfe, opt.seed);
        for (const auto& r : rows)
            std::cout << "order " << r.order << " steps " << r.intervals << " mse "
                      << format_double(r.terminal_mse) << "\n";
        std::cout << "wrote " << path << "\n";
        return 0;
    }
    if (opt.command == "edit-study") {
        opt.field = "attention";  // the study always runs on the toy attention field
        AttentionField field(4, 8, 2, opt.seed);
        Rng rng(opt.seed);
        Tensor z0 = Tensor::zeros({field.dim()});
        for (double& v : z0.data) v = rng.normal();
        TimeGrid grid = TimeGrid::uniform(opt.intervals);
        SolverConfig cfg{opt.order, opt.delta_t, Direction::Denoise};
        std::vector<int> sweep;
        if (opt.n_share >= 0) sweep.push_back(opt.n_share);
        else
            for (int i = 0; i <= opt.intervals; ++i) sweep.push_back(i);
        auto rows = edit_study(field, z0, grid, cfg, ConditionId{opt.source_cond},
                               ConditionId{opt.target_cond}, sweep, opt.m_share);
        fs::path dir = out_dir(opt);
        fs::create_directories(dir);
        std::string path = (dir / (out_stem(opt, "edit-study") + ".csv")).string();
        write_edit_study_csv(rows, path, opt.m_share, opt.seed);
        std::cout << "wrote " << path << "\n";
        return 0;
    }
    throw ConfigError("unknown command '" + opt.command + "'");
}

}  // namespace

int main(int argc, char** argv) {
    Options opt;

    // The config file seeds defaults before CLI11 parses, so explicit flags
    // always win.
    for (int i = 1; i < argc - 1; ++i)
        if (std::string(argv[i]) == "--config") {
            try {
                load_config_file(argv[i + 1], opt);
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 2;
            }
        }

    CLI::App app{"rectified-flow solver toolkit"};
    app.require_subcommand(0, 1);
    std::string config_path;
    app.add_option("--config", config_path, "plain-text key = value config file");

    std::vector<CLI::App*> subs;
    for (const char* name : {"sample", "invert", "roundtrip", "train", "fig2", "converge",
                             "nfe-ablation", "edit-study"}) {
        CLI::App* sub = app.add_subcommand(name, "");
        sub->add_option("--config", config_path, "config file (already applied)");
        sub->add_option("--field", opt.field, "constant|linear-state|linear-time|quadratic-time|rotation|gaussian-pair|mlp|attention");
        sub->add_option("--a", opt.a, "linear-state rate / constant value");
        sub->add_option("--omega", opt.omega, "rotation rate");
        sub->add_option("--dim", opt.dim, "state dimension");
        sub->add_option("--n", opt.intervals, "number of timesteps");
        sub->add_option("--order", opt.order, "solver order 1|2|3");
        sub->add_option("--delta-t", opt.delta_t, "derivative probe step");
        sub->add_option("--seed", opt.seed, "rng seed");
        sub->add_option("--n-share", opt.n_share, "shared timesteps (edit-study)");
        sub->add_option("--m-share", opt.m_share, "shared final blocks (edit-study)");
        sub->add_option("--total-nfe", opt.total_nfe, "evaluation budget (nfe-ablation)");
        sub->add_option("--steps", opt.steps, "grid resolutions (converge)")->delimiter(',');
        sub->add_option("--orders", opt.orders, "orders to compare (fig2)")->delimiter(',');
        sub->add_option("--source-cond", opt.source_cond, "source condition id");
        sub->add_option("--target-cond", opt.target_cond, "target condition id");
        sub->add_option("--train-steps", opt.train_steps, "training steps");
        sub->add_option("--batch", opt.batch, "training batch size");
        sub->add_option("--lr", opt.lr, "learning rate");
        sub->add_option("--dist", opt.dist, "mixture|two-moons|checkerboard");
        sub->add_option("--model", opt.model_dir, "mlp parameter directory");
        sub->add_option("--input", opt.input, "initial state tensor file");
        sub->add_option("--out", opt.out_dir, "output directory (default $RFSOLVE_OUT or .)");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    std::string chosen;
    for (CLI::App* sub : subs)
        if (sub->parsed()) chosen = sub->get_name();
    if (chosen.empty() && opt.command.empty()) {
        std::cerr << "error: missing subcommand (see --help)\n";
        return 2;
    }
    if (!chosen.empty()) {
        if (!opt.command.empty() && opt.command != chosen) {
            std::cerr << "error: config command '" << opt.command
                      << "' disagrees with subcommand '" << chosen << "'\n";
            return 2;
        }
        opt.command = chosen;
    }

    try {
        return run(opt);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
