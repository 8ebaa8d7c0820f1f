#include "spibb/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "spibb/algorithms.hpp"
#include "spibb/baseline.hpp"
#include "spibb/benchmark.hpp"
#include "spibb/bounds.hpp"
#include "spibb/data.hpp"
#include "spibb/errors.hpp"
#include "spibb/io.hpp"

#ifndef SPIBB_VERSION
#define SPIBB_VERSION "dev"
#endif

namespace spibb::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Run manifest: the canonical config, its digest, and the files produced.
/// Timestamps live here and never in result files.
json make_manifest(const std::string& command, const std::string& config_bytes, const json& config,
                   const std::vector<fs::path>& outputs, const std::string& started_at) {
    json paths = json::array();
    for (const auto& p : outputs) paths.push_back(p.string());
    return {{"command", command},
            {"tool_version", SPIBB_VERSION},
            {"config", config},
            {"config_digest", "sha256:" + io::sha256_hex(config_bytes)},
            {"started_at", started_at},
            {"finished_at", utc_now()},
            {"outputs", std::move(paths)}};
}

fs::path sidecar(const fs::path& out, const std::string& suffix) {
    return fs::path(out.string() + suffix);
}

/// Canonical serialization used both for the manifest copy and the digest.
std::string canonical(const json& config) { return config.dump(); }

Dataset load_dataset(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return io::read_dataset_jsonl(in);
}

struct Options {
    // gen-mdp
    std::uint64_t seed = 0;
    int states = 50;
    int actions = 4;
    int connectivity = 4;
    double gamma = 0.95;
    // gen-baseline
    double eta = 0.9;
    double tol = 1e-3;
    // collect
    int n_trajectories = 0;
    int max_len = kDefaultMaxTrajectoryLength;
    // train
    std::string algo;
    std::string baseline = "mle";
    std::optional<double> n_wedge;
    std::optional<double> epsilon;
    std::optional<double> kappa;
    double delta = 0.05;
    double delta_prime = 0.05;
    bool bounds = false;
    // bounds
    double v_max = 1.0;
    double r_max = 1.0;
    double rho_pistar = 0.0;
    double rho_baseline = 0.0;
    std::optional<double> lemma1_eps;
    // benchmark
    int workers = 1;
    // paths
    std::string mdp_path;
    std::string policy_path;
    std::string dataset_path;
    std::string config_path;
    std::string records_path;
    std::string out_path;
};

int cmd_gen_mdp(const Options& o, std::ostream& out) {
    const std::string started = utc_now();
    const json config = {{"seed", o.seed}, {"n_states", o.states}, {"n_actions", o.actions},
                         {"connectivity", o.connectivity}, {"gamma", o.gamma}};
    Rng rng(derive_seed(o.seed, 0));
    const FiniteMdp mdp = random_mdp({o.states, o.actions, o.connectivity, o.gamma}, rng);
    io::write_json_file(o.out_path, io::mdp_to_json(mdp));
    const fs::path manifest = sidecar(o.out_path, ".manifest.json");
    io::write_json_file(manifest, make_manifest("gen-mdp", canonical(config), config, {o.out_path}, started));
    out << "wrote " << o.out_path << " (goal state " << mdp.terminal_states.front() << ")\n";
    return kOk;
}

int cmd_gen_baseline(const Options& o, std::ostream& out) {
    const std::string started = utc_now();
    const FiniteMdp mdp = io::mdp_from_json(io::read_json_file(o.mdp_path));
    const json config = {{"seed", o.seed}, {"eta", o.eta}, {"tol", o.tol},
                         {"mdp_digest", "sha256:" + io::sha256_hex(io::read_text_file(o.mdp_path))}};
    Rng rng(derive_seed(o.seed, 1));
    BaselineCalibration cal;
    const Policy pi = random_baseline(mdp, o.eta, rng, o.tol, &cal);
    io::write_json_file(o.out_path, io::policy_to_json(pi));
    json manifest = make_manifest("gen-baseline", canonical(config), config, {o.out_path}, started);
    manifest["calibration"] = {{"target", cal.target},       {"achieved", cal.achieved},
                               {"optimal", cal.optimal},     {"uniform", cal.uniform},
                               {"temperature", cal.temperature}, {"attempts", cal.attempts}};
    io::write_json_file(sidecar(o.out_path, ".manifest.json"), manifest);
    out << "baseline performance " << cal.achieved << " (target " << cal.target << ")\n";
    return kOk;
}

int cmd_collect(const Options& o, std::ostream& out) {
    const std::string started = utc_now();
    const FiniteMdp mdp = io::mdp_from_json(io::read_json_file(o.mdp_path));
    const Policy pi = io::policy_from_json(io::read_json_file(o.policy_path));
    const json config = {{"seed", o.seed}, {"n_trajectories", o.n_trajectories}, {"max_len", o.max_len},
                         {"mdp_digest", "sha256:" + io::sha256_hex(io::read_text_file(o.mdp_path))},
                         {"policy_digest", "sha256:" + io::sha256_hex(io::read_text_file(o.policy_path))},
                         {"size_unit", "trajectories"}};
    const Dataset ds = collect_dataset(mdp, pi, o.n_trajectories, o.max_len, o.seed);
    std::ostringstream text;
    io::write_dataset_jsonl(text, ds);
    io::write_text_file(o.out_path, text.str());
    io::write_json_file(sidecar(o.out_path, ".manifest.json"),
                        make_manifest("collect", canonical(config), config, {o.out_path}, started));
    out << "wrote " << ds.n_trajectories << " trajectories (" << ds.transitions.size() << " transitions)\n";
    return kOk;
}

void require(const std::optional<double>& v, const char* flag) {
    if (!v) throw ValidationError(std::string("missing required flag ") + flag);
}

int cmd_train(const Options& o, std::ostream& out) {
    if (o.algo == "spibb") require(o.n_wedge, "--n-wedge");
    if (o.algo == "soft-spibb") require(o.epsilon, "--epsilon");
    if (o.algo == "ramdp") require(o.kappa, "--kappa");
    if (o.bounds && o.algo != "spibb") throw ValidationError("--bounds is only available with --algo spibb");

    const FiniteMdp mdp = io::mdp_from_json(io::read_json_file(o.mdp_path));
    const Dataset ds = load_dataset(o.dataset_path);
    const CountTables counts = build_counts(ds, mdp.n_states, mdp.n_actions);
    const FiniteMdp mle = build_mle_mdp(counts, mdp);

    Policy baseline;
    if (o.baseline == "true") {
        if (o.policy_path.empty()) throw ValidationError("--baseline true requires --policy");
        baseline = io::policy_from_json(io::read_json_file(o.policy_path));
    } else {
        baseline = mle_baseline(counts);
    }

    Policy pi;
    if (o.algo == "basic") {
        pi = train_basic_rl(mle);
    } else if (o.algo == "ramdp") {
        pi = train_ramdp(mle, counts, {*o.kappa});
    } else if (o.algo == "spibb") {
        pi = train_spibb(mle, counts, baseline, {*o.n_wedge});
    } else if (o.algo == "soft-spibb") {
        pi = train_soft_spibb(mle, error_table(counts, o.delta), baseline, {*o.epsilon, o.delta});
    } else {
        pi = baseline;
    }
    io::write_json_file(o.out_path, io::policy_to_json(pi));

    if (o.bounds) {
        const double zeta = theorem1_zeta(*o.n_wedge, mdp.n_states, mdp.n_actions, mdp.gamma, mdp.v_max, o.delta,
                                          performance(mle, pi), performance(mle, baseline));
        BoundReport report{zeta, zeta, o.delta, 0.0, o.delta, 0.0};
        if (o.baseline == "mle")
            report = theorem2_zeta_hat(zeta, o.delta, mdp.r_max, mdp.gamma, mdp.n_states, mdp.n_actions,
                                       ds.n_trajectories, o.delta_prime);
        json j = io::bounds_to_json(report);
        j["vacuous"] = is_vacuous(report, mdp.v_max, mdp.gamma);
        io::write_json_file(sidecar(o.out_path, ".bounds.json"), j);
    }
    out << "wrote " << o.out_path << '\n';
    return kOk;
}

int cmd_bounds(const Options& o, std::ostream& out) {
    const double zeta = theorem1_zeta(*o.n_wedge, o.states, o.actions, o.gamma, o.v_max, o.delta, o.rho_pistar,
                                      o.rho_baseline);
    const BoundReport report =
        theorem2_zeta_hat(zeta, o.delta, o.r_max, o.gamma, o.states, o.actions, o.n_trajectories, o.delta_prime);
    json j = io::bounds_to_json(report);
    j["vacuous"] = is_vacuous(report, o.v_max, o.gamma);
    if (o.lemma1_eps) j["lemma1_bound"] = lemma1_bound(o.states, o.actions, o.n_trajectories, *o.lemma1_eps);
    if (o.out_path.empty()) {
        out << j.dump(2) << '\n';
    } else {
        io::write_json_file(o.out_path, j);
    }
    return kOk;
}

int cmd_benchmark(const Options& o, std::ostream& out) {
    const std::string started = utc_now();
    const std::string config_bytes = io::read_text_file(o.config_path);
    json config_json;
    try {
        config_json = json::parse(config_bytes);
    } catch (const json::parse_error& e) {
        throw ValidationError(o.config_path + ": " + e.what());
    }
    const BenchmarkConfig cfg = io::config_from_json(config_json);
    if (o.workers < 1) throw ValidationError("--workers must be >= 1");

    const fs::path dir(o.out_path);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
    const fs::path records_path = dir / "records.csv";
    const fs::path summary_path = dir / "summary.csv";
    const fs::path manifest_path = dir / "manifest.json";
    // Fail on an unwritable directory before spending the compute.
    io::write_text_file(records_path, "");

    const BenchmarkResult result = run_benchmark(cfg, o.workers);
    std::ostringstream records_text;
    io::write_records_csv(records_text, result.records);
    io::write_text_file(records_path, records_text.str());
    std::ostringstream summary_text;
    io::write_summary_csv(summary_text, aggregate(result.records));
    io::write_text_file(summary_path, summary_text.str());

    json manifest = make_manifest("benchmark", config_bytes, config_json, {records_path, summary_path}, started);
    manifest["skipped_seeds"] = result.skipped_seeds;
    manifest["degenerate_seeds"] = result.degenerate_seeds;
    manifest["dataset_size_unit"] = "trajectories";
    manifest["gamma"] = cfg.mdp.gamma;
    manifest["gamma_note"] = "discount for the random-MDP benchmark is a configured value (default 0.95)";
    io::write_json_file(manifest_path, manifest);
    out << "wrote " << result.records.size() << " records (" << result.skipped_seeds << " skipped, "
        << result.degenerate_seeds << " degenerate seeds) to " << dir.string() << '\n';
    return kOk;
}

int cmd_summarize(const Options& o, std::ostream& out) {
    std::ifstream in(o.records_path);
    if (!in) throw IoError("cannot open " + o.records_path);
    const auto rows = aggregate(io::read_records_csv(in));
    std::ostringstream text;
    io::write_summary_csv(text, rows);
    if (o.out_path.empty()) {
        out << text.str();
    } else {
        io::write_text_file(o.out_path, text.str());
    }
    return kOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Safe policy improvement with estimated baselines for finite MDPs"};
    app.require_subcommand(1);
    Options o;

    auto* gen_mdp = app.add_subcommand("gen-mdp", "Generate a random goal-reaching MDP");
    gen_mdp->add_option("--seed", o.seed, "Random seed")->required();
    gen_mdp->add_option("--states", o.states, "Number of states")->capture_default_str();
    gen_mdp->add_option("--actions", o.actions, "Number of actions")->capture_default_str();
    gen_mdp->add_option("--connectivity", o.connectivity, "Successors per state-action pair")->capture_default_str();
    gen_mdp->add_option("--gamma", o.gamma, "Discount factor")->capture_default_str();
    gen_mdp->add_option("--out", o.out_path, "Output MDP JSON")->required();

    auto* gen_baseline = app.add_subcommand("gen-baseline", "Generate a baseline with a target performance ratio");
    gen_baseline->add_option("--mdp", o.mdp_path, "MDP JSON")->required();
    gen_baseline->add_option("--eta", o.eta, "Performance ratio between uniform (0) and optimal (1)")->required();
    gen_baseline->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    gen_baseline->add_option("--tol", o.tol, "Calibration tolerance")->capture_default_str();
    gen_baseline->add_option("--out", o.out_path, "Output policy JSON")->required();

    auto* collect = app.add_subcommand("collect", "Roll out a policy and log trajectories");
    collect->add_option("--mdp", o.mdp_path, "MDP JSON")->required();
    collect->add_option("--policy", o.policy_path, "Behaviour policy JSON")->required();
    collect->add_option("--n", o.n_trajectories, "Number of trajectories")->required();
    collect->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    collect->add_option("--max-len", o.max_len, "Trajectory length cap")->capture_default_str();
    collect->add_option("--out", o.out_path, "Output dataset (JSON lines)")->required();

    auto* train = app.add_subcommand("train", "Train a policy from a dataset");
    train->add_option("--algo", o.algo, "Trainer")
        ->required()
        ->check(CLI::IsMember({"basic", "ramdp", "spibb", "soft-spibb", "baseline"}));
    train->add_option("--baseline", o.baseline, "Baseline given to the trainer")
        ->check(CLI::IsMember({"true", "mle"}))
        ->capture_default_str();
    train->add_option("--dataset", o.dataset_path, "Dataset (JSON lines)")->required();
    train->add_option("--mdp", o.mdp_path, "MDP JSON supplying discount, initial and terminal states")->required();
    train->add_option("--policy", o.policy_path, "True baseline policy JSON (with --baseline true)");
    train->add_option("--n-wedge", o.n_wedge, "SPIBB bootstrapping threshold");
    train->add_option("--epsilon", o.epsilon, "Soft-SPIBB error budget");
    train->add_option("--kappa", o.kappa, "RaMDP reward penalty coefficient");
    train->add_option("--delta", o.delta, "Confidence of the error model")->capture_default_str();
    train->add_option("--delta-prime", o.delta_prime, "Confidence of the baseline estimate")->capture_default_str();
    train->add_flag("--bounds", o.bounds, "Also write <out>.bounds.json");
    train->add_option("--out", o.out_path, "Output policy JSON")->required();

    auto* bounds = app.add_subcommand("bounds", "Evaluate the safety bounds");
    bounds->add_option("--n-wedge", o.n_wedge, "SPIBB bootstrapping threshold")->required();
    bounds->add_option("--states", o.states, "Number of states")->capture_default_str();
    bounds->add_option("--actions", o.actions, "Number of actions")->capture_default_str();
    bounds->add_option("--gamma", o.gamma, "Discount factor")->capture_default_str();
    bounds->add_option("--v-max", o.v_max, "Maximal value")->capture_default_str();
    bounds->add_option("--r-max", o.r_max, "Maximal absolute reward")->capture_default_str();
    bounds->add_option("--delta", o.delta, "Confidence of the error model")->capture_default_str();
    bounds->add_option("--delta-prime", o.delta_prime, "Confidence of the baseline estimate")->capture_default_str();
    bounds->add_option("--n-trajectories", o.n_trajectories, "Trajectories in the dataset")->required();
    bounds->add_option("--rho-pistar", o.rho_pistar, "rho(pi*_b, M_hat)")->capture_default_str();
    bounds->add_option("--rho-baseline", o.rho_baseline, "rho(pi_b, M_hat)")->capture_default_str();
    bounds->add_option("--lemma1-eps", o.lemma1_eps, "Also report the visit concentration bound at this epsilon");
    bounds->add_option("--out", o.out_path, "Output JSON (stdout if omitted)");

    auto* benchmark = app.add_subcommand("benchmark", "Run the random-MDP benchmark");
    benchmark->add_option("--config", o.config_path, "Benchmark config JSON")->required();
    benchmark->add_option("--workers", o.workers, "Worker threads")->capture_default_str();
    benchmark->add_option("--out", o.out_path, "Output directory")->required();

    auto* summarize = app.add_subcommand("summarize", "Aggregate a records CSV");
    summarize->add_option("--records", o.records_path, "records.csv")->required();
    summarize->add_option("--out", o.out_path, "Output summary CSV (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen_mdp) return cmd_gen_mdp(o, out);
        if (*gen_baseline) return cmd_gen_baseline(o, out);
        if (*collect) return cmd_collect(o, out);
        if (*train) return cmd_train(o, out);
        if (*bounds) return cmd_bounds(o, out);
        if (*benchmark) return cmd_benchmark(o, out);
        if (*summarize) return cmd_summarize(o, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kUsage;
}

} // namespace spibb::cli
