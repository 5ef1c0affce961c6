#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "polyint/integrators.hpp"
#include "polyint/polynet.hpp"
#include "polyint/reference.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polyint;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBlowup = 3;

struct SystemOptions {
    std::string preset;
    std::string file;
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
};

struct RunOptions {
    SystemOptions system;
    std::string method = "rk4";  // rk4 | abm2 | rk
    std::string tableau;         // preset name or file, required for method rk
    std::string engine = "neural";
    double h = 0.01;
    std::int64_t steps = 0;
    std::string x0_text;
    std::string seed_policy = "rk4-bootstrap";
    std::string encoding = "auto";
    std::string out_dir;
    std::string name;
    std::string trace_file;
};

void add_system_options(CLI::App* cmd, SystemOptions& opts) {
    auto* preset = cmd->add_option("--preset", opts.preset, "Built-in system (lorenz63)");
    auto* file = cmd->add_option("--system", opts.file, "System description file");
    preset->excludes(file);
    file->excludes(preset);
    cmd->add_option("--sigma", opts.sigma, "lorenz63 sigma")->capture_default_str();
    cmd->add_option("--rho", opts.rho, "lorenz63 rho")->capture_default_str();
    cmd->add_option("--beta", opts.beta, "lorenz63 beta")->capture_default_str();
}

PolynomialSystem load_system_opts(const SystemOptions& opts) {
    if (!opts.file.empty()) return load_system(opts.file);
    if (opts.preset == "lorenz63" || opts.preset.empty())
        return lorenz63(opts.sigma, opts.rho, opts.beta);
    throw std::invalid_argument("unknown preset: " + opts.preset);
}

json describe_system(const SystemOptions& opts, const PolynomialSystem& sys) {
    json desc;
    if (!opts.file.empty()) {
        desc["source"] = opts.file;
    } else {
        desc["preset"] = "lorenz63";
        desc["sigma"] = opts.sigma;
        desc["rho"] = opts.rho;
        desc["beta"] = opts.beta;
    }
    desc["definition"] = json::parse(system_to_json(sys));
    return desc;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> values;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        if (token.empty()) continue;
        values.push_back(parse_double(token));
    }
    return values;
}

StateVector resolve_x0(const RunOptions& run, const PolynomialSystem& sys) {
    if (!run.x0_text.empty()) {
        auto values = parse_number_list(run.x0_text);
        if (static_cast<int>(values.size()) != sys.n_vars())
            throw std::invalid_argument("--x0 needs " + std::to_string(sys.n_vars()) +
                                        " comma-separated values");
        return StateVector(std::move(values));
    }
    if (run.system.file.empty())
        return StateVector(std::vector<double>(sys.n_vars(), 1.0));  // lorenz default (1,1,1)
    throw std::invalid_argument("--x0 is required for file-defined systems");
}

WeightEncoding parse_encoding(const std::string& text) {
    if (text == "auto") return WeightEncoding::Auto;
    if (text == "ratio") return WeightEncoding::Ratio;
    if (text == "direct") return WeightEncoding::Direct;
    throw std::invalid_argument("unknown encoding: " + text);
}

ButcherTableau resolve_tableau(const RunOptions& run) {
    if (run.method == "rk4") return ButcherTableau::rk4(run.h);
    if (run.method != "rk")
        throw std::invalid_argument("method " + run.method + " takes no tableau");
    if (run.tableau.empty())
        throw std::invalid_argument("--tableau is required with --method rk");
    if (ButcherTableau::is_preset(run.tableau))
        return ButcherTableau::preset(run.tableau, run.h);
    return load_tableau(run.tableau, run.h);
}

fs::path resolve_out_dir(const RunOptions& run) {
    if (!run.out_dir.empty()) return run.out_dir;
    if (const char* env = std::getenv("POLYINT_OUT_DIR"); env && *env) return env;
    return ".";
}

struct SeedSpec {
    SeedPolicy policy = SeedPolicy::Rk4Bootstrap;
    std::optional<StateVector> x1;
};

SeedSpec resolve_seed(const RunOptions& run, const PolynomialSystem& sys) {
    SeedSpec spec;
    if (run.seed_policy == "rk4-bootstrap") return spec;
    const std::string prefix = "explicit:";
    if (run.seed_policy.rfind(prefix, 0) != 0)
        throw std::invalid_argument(
            "--seed-policy must be rk4-bootstrap or explicit:<file>");
    std::ifstream in(run.seed_policy.substr(prefix.size()));
    if (!in)
        throw std::invalid_argument("cannot open seed state file: " +
                                    run.seed_policy.substr(prefix.size()));
    std::vector<double> values;
    std::string token;
    while (in >> token) {
        for (const auto& piece : parse_number_list(token)) values.push_back(piece);
    }
    if (static_cast<int>(values.size()) != sys.n_vars())
        throw std::invalid_argument("seed state file needs " +
                                    std::to_string(sys.n_vars()) + " values");
    spec.policy = SeedPolicy::ExplicitSecondState;
    spec.x1 = StateVector(std::move(values));
    return spec;
}

// Runs one engine over the shared configuration. Throws BlowupError with
// the partial trajectory attached.
Trajectory run_engine(const std::string& engine, const RunOptions& run,
                      const PolynomialSystem& sys, const StateVector& x0,
                      std::ostream* trace = nullptr) {
    const SeedSpec seed_spec = resolve_seed(run, sys);
    const WeightEncoding enc = parse_encoding(run.encoding);
    if (engine == "neural") {
        const PolyNet net = compile(sys);
        if (run.method == "abm2") {
            AbmCircuit abm = build_abm2(net, run.h);
            if (trace) abm.circuit.set_trace(trace);
            return integrate(abm, x0, run.steps, seed_spec.policy,
                             seed_spec.x1 ? &*seed_spec.x1 : nullptr);
        }
        RkCircuit rk = run.method == "rk4" ? build_rk4(net, run.h)
                                           : build_rk_general(net, resolve_tableau(run), enc);
        if (trace) rk.circuit.set_trace(trace);
        return integrate(rk, x0, run.steps);
    }
    if (engine != "classical-matched" && engine != "classical-naive")
        throw std::invalid_argument("unknown engine: " + engine);
    const bool matched = engine == "classical-matched";
    if (run.method == "abm2")
        return classical_abm2_integrate(sys, x0, run.steps, run.h, matched,
                                        seed_spec.policy == SeedPolicy::Rk4Bootstrap,
                                        seed_spec.x1 ? &*seed_spec.x1 : nullptr);
    return classical_rk_integrate(sys, resolve_tableau(run), x0, run.steps, matched, enc);
}

json base_manifest(const std::string& command, const RunOptions& run,
                   const PolynomialSystem& sys, const StateVector& x0) {
    json m;
    m["command"] = command;
    m["system"] = describe_system(run.system, sys);
    m["method"] = run.method;
    if (run.method == "rk") m["tableau"] = json::parse(tableau_to_json(resolve_tableau(run)));
    m["h"] = run.h;
    m["steps"] = run.steps;
    m["x0"] = x0.values();
    m["seed_policy"] = run.seed_policy;
    m["encoding"] = run.encoding;
    return m;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

void write_manifest(const fs::path& path, const json& manifest) {
    write_text_file(path, manifest.dump(2) + "\n");
}

int cmd_compile(const RunOptions& run) {
    const PolynomialSystem sys = load_system_opts(run.system);
    const PolyNet net = compile(sys);
    const fs::path dir = resolve_out_dir(run);
    fs::create_directories(dir);
    const std::string name = run.name.empty() ? "polynet" : run.name;

    write_text_file(dir / (name + ".dot"), polynet_to_dot(net));
    json report;
    report["n_vars"] = sys.n_vars();
    report["max_degree"] = sys.max_degree();
    report["terms"] = sys.terms().size();
    report["hidden_nodes"] = net.hidden_nodes.size();
    report["hidden_node_bound"] = hidden_node_bound(sys.n_vars(), sys.max_degree());
    json hidden = json::array();
    for (const auto& m : net.hidden_nodes) hidden.push_back(m.text());
    report["hidden_monomials"] = hidden;
    write_text_file(dir / (name + ".report.json"), report.dump(2) + "\n");

    std::cout << "n_vars=" << sys.n_vars() << " max_degree=" << sys.max_degree()
              << " terms=" << sys.terms().size()
              << " hidden_nodes=" << net.hidden_nodes.size()
              << " bound=" << hidden_node_bound(sys.n_vars(), sys.max_degree()) << "\n"
              << "wrote " << (dir / (name + ".dot")).string() << "\n"
              << "wrote " << (dir / (name + ".report.json")).string() << "\n";
    return kExitOk;
}

int cmd_integrate(const RunOptions& run) {
    const PolynomialSystem sys = load_system_opts(run.system);
    const StateVector x0 = resolve_x0(run, sys);
    const fs::path dir = resolve_out_dir(run);
    fs::create_directories(dir);
    const std::string name = run.name.empty() ? "trajectory" : run.name;
    const fs::path csv_path = dir / (name + ".csv");
    const fs::path manifest_path = dir / (name + ".manifest.json");

    json manifest = base_manifest("integrate", run, sys, x0);
    manifest["engine"] = run.engine;
    manifest["outputs"] = {{"trajectory", csv_path.string()}};
    manifest["truncated"] = false;

    std::optional<std::ofstream> trace;
    if (!run.trace_file.empty()) {
        trace.emplace(dir / run.trace_file);
        manifest["outputs"]["trace"] = (dir / run.trace_file).string();
    }
    try {
        const Trajectory traj =
            run_engine(run.engine, run, sys, x0, trace ? &*trace : nullptr);
        std::ofstream out(csv_path);
        write_csv(traj, out);
        write_manifest(manifest_path, manifest);
        std::cout << "wrote " << csv_path.string() << " (" << traj.size() << " rows)\n";
        return kExitOk;
    } catch (const BlowupError& e) {
        std::ofstream out(csv_path);
        write_csv(e.partial, out);
        manifest["truncated"] = true;
        manifest["failed_step"] = e.step_index;
        write_manifest(manifest_path, manifest);
        std::cerr << "error: " << e.what() << " (partial trajectory written)\n";
        return kExitBlowup;
    }
}

int cmd_compare(const RunOptions& run, const std::string& engine_a,
                const std::string& engine_b, double threshold) {
    const PolynomialSystem sys = load_system_opts(run.system);
    const StateVector x0 = resolve_x0(run, sys);
    const fs::path dir = resolve_out_dir(run);
    fs::create_directories(dir);
    const std::string name = run.name.empty() ? "compare" : run.name;

    const Trajectory a = run_engine(engine_a, run, sys, x0);
    const Trajectory b = run_engine(engine_b, run, sys, x0);
    const DivergenceSeries series = divergence(a, b);

    const fs::path csv_path = dir / (name + ".csv");
    std::ofstream out(csv_path);
    write_csv(series, out);

    double max_distance = 0.0;
    std::optional<std::size_t> first_exceedance;
    for (std::size_t k = 0; k < series.distances.size(); ++k) {
        max_distance = std::max(max_distance, series.distances[k]);
        if (!first_exceedance && series.distances[k] > threshold) first_exceedance = k;
    }
    json summary;
    summary["engine_a"] = engine_a;
    summary["engine_b"] = engine_b;
    summary["threshold"] = threshold;
    summary["max_distance"] = max_distance;
    if (first_exceedance)
        summary["first_exceedance_step"] = *first_exceedance;
    else
        summary["first_exceedance_step"] = nullptr;
    write_text_file(dir / (name + ".summary.json"), summary.dump(2) + "\n");

    json manifest = base_manifest("compare", run, sys, x0);
    manifest["engine_a"] = engine_a;
    manifest["engine_b"] = engine_b;
    manifest["threshold"] = threshold;
    manifest["outputs"] = {{"divergence", csv_path.string()},
                           {"summary", (dir / (name + ".summary.json")).string()}};
    write_manifest(dir / (name + ".manifest.json"), manifest);

    std::cout << "max_distance=" << format_double(max_distance) << " first_exceedance=";
    if (first_exceedance)
        std::cout << *first_exceedance;
    else
        std::cout << "none";
    std::cout << "\nwrote " << csv_path.string() << "\n";
    return kExitOk;
}

int cmd_perturb(const RunOptions& run, const std::vector<double>& deltas,
                std::int64_t spin_up_steps, int direction) {
    if (deltas.empty()) throw CLI::ValidationError("--deltas needs at least one value");
    const PolynomialSystem sys = load_system_opts(run.system);
    StateVector x0 = resolve_x0(run, sys);
    if (spin_up_steps > 0) x0 = spin_up(sys, x0, spin_up_steps, run.h);
    const MethodKind method = run.method == "abm2" ? MethodKind::Abm2 : MethodKind::Rk4;
    if (run.method != "abm2" && run.method != "rk4")
        throw std::invalid_argument("perturb supports --method rk4 or abm2");

    const PerturbationResult result =
        perturbation_experiment(sys, method, run.h, run.steps, x0, deltas, direction);

    const fs::path dir = resolve_out_dir(run);
    fs::create_directories(dir);
    const std::string name = run.name.empty() ? "perturb" : run.name;

    json summary;
    summary["deltas"] = deltas;
    summary["realized_deltas"] = result.realized_deltas;
    json outputs;
    json exceedance = json::array();
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        const fs::path path = dir / (name + ".delta" + std::to_string(i) + ".csv");
        std::ofstream out(path);
        write_csv(result.perturbed[i], out);
        outputs["delta" + std::to_string(i)] = path.string();
        std::optional<std::size_t> first;
        double max_distance = 0.0;
        for (std::size_t k = 0; k < result.perturbed[i].distances.size(); ++k) {
            max_distance = std::max(max_distance, result.perturbed[i].distances[k]);
            if (!first && result.perturbed[i].distances[k] >= 1.0) first = k;
        }
        json entry;
        entry["delta"] = deltas[i];
        entry["max_distance"] = max_distance;
        entry["first_step_above_one"] = first ? json(*first) : json(nullptr);
        exceedance.push_back(entry);
    }
    summary["series"] = exceedance;
    const fs::path nn_path = dir / (name + ".neural_vs_naive.csv");
    std::ofstream nn_out(nn_path);
    write_csv(result.neural_vs_naive, nn_out);
    outputs["neural_vs_naive"] = nn_path.string();
    write_text_file(dir / (name + ".summary.json"), summary.dump(2) + "\n");

    json manifest = base_manifest("perturb", run, sys, x0);
    manifest["deltas"] = deltas;
    manifest["spin_up_steps"] = spin_up_steps;
    manifest["direction"] = direction;
    manifest["outputs"] = outputs;
    write_manifest(dir / (name + ".manifest.json"), manifest);

    std::cout << "wrote " << deltas.size() << " divergence series under "
              << dir.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural-circuit integration of polynomial dynamical systems"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "Print help");  // frees -h for the step-size flag

    RunOptions run;
    std::string engine_a = "neural";
    std::string engine_b = "classical-matched";
    double threshold = 1e-6;
    std::vector<double> deltas;
    // 1200 rather than a round 1000: from the 1000-step point, the 1e-15 and
    // 3e-15 perturbed trajectories collapse onto the same rounded orbit
    // within ~15 steps and their divergence curves coincide.
    std::int64_t spin_up_steps = 1200;
    int direction = 0;

    auto add_run_options = [&](CLI::App* cmd, bool with_engine) {
        cmd->set_help_flag("--help", "Print help");
        add_system_options(cmd, run.system);
        cmd->add_option("--method", run.method, "rk4 | abm2 | rk (with --tableau)")
            ->capture_default_str();
        cmd->add_option("--tableau", run.tableau, "Tableau preset or file for --method rk");
        if (with_engine)
            cmd->add_option("--engine", run.engine,
                            "neural | classical-matched | classical-naive")
                ->capture_default_str();
        cmd->add_option("--h", run.h, "Fixed step size")->capture_default_str();
        cmd->add_option("--steps", run.steps, "Number of time steps")->capture_default_str();
        cmd->add_option("--x0", run.x0_text, "Initial state, comma separated");
        cmd->add_option("--seed-policy", run.seed_policy,
                        "abm2 seeding: rk4-bootstrap | explicit:<file>")
            ->capture_default_str();
        cmd->add_option("--encoding", run.encoding, "Stage-weight encoding: auto|ratio|direct")
            ->capture_default_str();
        cmd->add_option("--out-dir", run.out_dir,
                        "Output directory (default $POLYINT_OUT_DIR or .)");
        cmd->add_option("--name", run.name, "Basename for output files");
    };

    auto* compile_cmd = app.add_subcommand("compile", "Compile a system and export its circuit");
    compile_cmd->set_help_flag("--help", "Print help");
    add_system_options(compile_cmd, run.system);
    compile_cmd->add_option("--out-dir", run.out_dir, "Output directory");
    compile_cmd->add_option("--name", run.name, "Basename for output files");

    auto* integrate_cmd = app.add_subcommand("integrate", "Integrate and write a trajectory");
    add_run_options(integrate_cmd, true);
    integrate_cmd->add_option("--trace", run.trace_file,
                              "Write a per-micro-step trace CSV (neural engine)");

    auto* compare_cmd = app.add_subcommand("compare", "Divergence between two engines");
    add_run_options(compare_cmd, false);
    compare_cmd->add_option("--engine-a", engine_a, "First engine")->capture_default_str();
    compare_cmd->add_option("--engine-b", engine_b, "Second engine")->capture_default_str();
    compare_cmd->add_option("--threshold", threshold, "Exceedance threshold")
        ->capture_default_str();

    auto* perturb_cmd =
        app.add_subcommand("perturb", "Initial-condition perturbation experiment");
    run.steps = 40000;
    add_run_options(perturb_cmd, false);
    perturb_cmd->add_option("--deltas", deltas, "Perturbation magnitudes")
        ->required()
        ->delimiter(',');
    perturb_cmd->add_option("--spin-up", spin_up_steps, "Attractor spin-up steps (0 = none)")
        ->capture_default_str();
    perturb_cmd->add_option("--direction", direction, "Perturbed component index")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (app.got_subcommand(compile_cmd)) return cmd_compile(run);
        if (app.got_subcommand(integrate_cmd)) return cmd_integrate(run);
        if (app.got_subcommand(compare_cmd))
            return cmd_compare(run, engine_a, engine_b, threshold);
        if (app.got_subcommand(perturb_cmd))
            return cmd_perturb(run, deltas, spin_up_steps, direction);
    } catch (const BlowupError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBlowup;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
