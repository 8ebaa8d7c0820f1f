#include "spibb/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "spibb/errors.hpp"

namespace spibb::io {

namespace {

template <typename T>
T get_field(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad field '") + key + "': " + e.what());
    }
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return get_field<T>(j, key);
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known, const char* what) {
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, _] : j.items())
        if (!allowed.contains(key)) throw ValidationError(std::string("unknown key '") + key + "' in " + what);
}

json parse_json_line(const std::string& line, std::size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ValidationError("not a number: '" + s + "'");
    return v;
}

int parse_int(const std::string& s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ValidationError("not an integer: '" + s + "'");
    return v;
}

void expect_header(std::istream& in, const char* header) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw ValidationError("unexpected CSV header: " + line);
}

} // namespace

json mdp_to_json(const FiniteMdp& mdp) {
    json transition = json::array();
    json reward = json::array();
    for (int x = 0; x < mdp.n_states; ++x) {
        json per_action = json::array();
        json rewards = json::array();
        for (int a = 0; a < mdp.n_actions; ++a) {
            const auto row = mdp.row(x, a);
            per_action.push_back(std::vector<double>(row.begin(), row.end()));
            rewards.push_back(mdp.r(x, a));
        }
        transition.push_back(std::move(per_action));
        reward.push_back(std::move(rewards));
    }
    json j = {{"format_version", kMdpFormatVersion},
              {"n_states", mdp.n_states},
              {"n_actions", mdp.n_actions},
              {"gamma", mdp.gamma},
              {"initial_state", mdp.initial_state},
              {"terminal_states", mdp.terminal_states},
              {"transition", std::move(transition)},
              {"reward", std::move(reward)},
              {"r_max", mdp.r_max},
              {"v_max", mdp.v_max}};
    if (!mdp.entry_reward.empty()) j["entry_reward"] = mdp.entry_reward;
    return j;
}

FiniteMdp mdp_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("MDP document must be a JSON object");
    const int version = get_optional<int>(j, "format_version").value_or(kMdpFormatVersion);
    if (version != kMdpFormatVersion) throw ValidationError("unsupported MDP format_version " + std::to_string(version));
    FiniteMdp mdp(get_field<int>(j, "n_states"), get_field<int>(j, "n_actions"), get_field<double>(j, "gamma"));
    mdp.initial_state = get_field<int>(j, "initial_state");
    mdp.set_terminal(get_field<std::vector<int>>(j, "terminal_states"));
    const auto transition = get_field<std::vector<std::vector<std::vector<double>>>>(j, "transition");
    const auto reward = get_field<std::vector<std::vector<double>>>(j, "reward");
    if (transition.size() != static_cast<std::size_t>(mdp.n_states) ||
        reward.size() != static_cast<std::size_t>(mdp.n_states))
        throw ValidationError("transition/reward first dimension must equal n_states");
    for (int x = 0; x < mdp.n_states; ++x) {
        if (transition[x].size() != static_cast<std::size_t>(mdp.n_actions) ||
            reward[x].size() != static_cast<std::size_t>(mdp.n_actions))
            throw ValidationError("transition/reward second dimension must equal n_actions");
        for (int a = 0; a < mdp.n_actions; ++a) {
            if (transition[x][a].size() != static_cast<std::size_t>(mdp.n_states))
                throw ValidationError("transition rows must have n_states entries");
            std::copy(transition[x][a].begin(), transition[x][a].end(), mdp.row(x, a).begin());
            mdp.r(x, a) = reward[x][a];
        }
    }
    mdp.r_max = get_field<double>(j, "r_max");
    mdp.v_max = get_field<double>(j, "v_max");
    if (auto entry = get_optional<std::vector<double>>(j, "entry_reward")) mdp.entry_reward = *entry;
    mdp.validate();
    return mdp;
}

json policy_to_json(const Policy& pi) {
    json probs = json::array();
    for (int x = 0; x < pi.n_states(); ++x) {
        const auto row = pi.row(x);
        probs.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"n_states", pi.n_states()}, {"n_actions", pi.n_actions()}, {"probs", std::move(probs)}};
}

Policy policy_from_json(const json& j) {
    Policy pi(get_field<int>(j, "n_states"), get_field<int>(j, "n_actions"));
    const auto probs = get_field<std::vector<std::vector<double>>>(j, "probs");
    if (probs.size() != static_cast<std::size_t>(pi.n_states())) throw ValidationError("probs must have n_states rows");
    for (int x = 0; x < pi.n_states(); ++x) {
        if (probs[x].size() != static_cast<std::size_t>(pi.n_actions()))
            throw ValidationError("policy rows must have n_actions entries");
        std::copy(probs[x].begin(), probs[x].end(), pi.row(x).begin());
    }
    pi.validate(1e-9);
    return pi;
}

json bounds_to_json(const BoundReport& r) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); };
    return {{"zeta", num(r.zeta)},
            {"zeta_hat", num(r.zeta_hat)},
            {"delta", r.delta},
            {"delta_prime", r.delta_prime},
            {"delta_hat", r.delta_hat},
            {"estimation_penalty", num(r.estimation_penalty)}};
}

BenchmarkConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    reject_unknown_keys(j,
                        {"n_states", "n_actions", "connectivity", "gamma", "eta", "dataset_sizes", "n_seeds",
                         "algorithms", "baseline_mode", "master_seed", "max_trajectory_length", "baseline_tolerance"},
                        "config");
    BenchmarkConfig cfg;
    cfg.mdp.n_states = get_optional<int>(j, "n_states").value_or(cfg.mdp.n_states);
    cfg.mdp.n_actions = get_optional<int>(j, "n_actions").value_or(cfg.mdp.n_actions);
    cfg.mdp.connectivity = get_optional<int>(j, "connectivity").value_or(cfg.mdp.connectivity);
    cfg.mdp.gamma = get_optional<double>(j, "gamma").value_or(cfg.mdp.gamma);
    cfg.eta = get_field<double>(j, "eta");
    cfg.dataset_sizes = get_field<std::vector<int>>(j, "dataset_sizes");
    cfg.n_seeds = get_optional<int>(j, "n_seeds").value_or(cfg.n_seeds);
    cfg.master_seed = get_field<std::uint64_t>(j, "master_seed");
    cfg.max_trajectory_length = get_optional<int>(j, "max_trajectory_length").value_or(cfg.max_trajectory_length);
    cfg.baseline_tolerance = get_optional<double>(j, "baseline_tolerance").value_or(cfg.baseline_tolerance);
    const std::string mode = get_optional<std::string>(j, "baseline_mode").value_or("both");
    if (mode == "true") {
        cfg.baseline_mode = BaselineModes::true_only;
    } else if (mode == "estimated") {
        cfg.baseline_mode = BaselineModes::estimated_only;
    } else if (mode == "both") {
        cfg.baseline_mode = BaselineModes::both;
    } else {
        throw ValidationError("baseline_mode must be one of true, estimated, both");
    }
    const json& algs = j.contains("algorithms") ? j.at("algorithms") : json();
    if (!algs.is_array() || algs.empty()) throw ValidationError("config needs a non-empty 'algorithms' array");
    for (const json& a : algs) {
        reject_unknown_keys(a, {"type", "name", "n_wedge", "epsilon", "kappa", "delta", "delta_prime"}, "algorithm");
        AlgorithmSpec spec;
        spec.type = get_field<std::string>(a, "type");
        spec.name = get_optional<std::string>(a, "name").value_or(spec.type);
        spec.n_wedge = get_optional<double>(a, "n_wedge");
        spec.epsilon = get_optional<double>(a, "epsilon");
        spec.kappa = get_optional<double>(a, "kappa");
        spec.delta = get_optional<double>(a, "delta").value_or(spec.delta);
        spec.delta_prime = get_optional<double>(a, "delta_prime").value_or(spec.delta_prime);
        cfg.algorithms.push_back(std::move(spec));
    }
    cfg.validate();
    return cfg;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void write_dataset_jsonl(std::ostream& out, const Dataset& ds) {
    for (const Transition& tr : ds.transitions) {
        out << "{\"x\":" << tr.x << ",\"a\":" << tr.a << ",\"r\":" << format_double(tr.r) << ",\"x_next\":" << tr.x_next
            << ",\"t\":" << tr.t << "}\n";
    }
}

Dataset read_dataset_jsonl(std::istream& in) {
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const json j = parse_json_line(line, line_no);
        Transition tr{get_field<int>(j, "x"), get_field<int>(j, "a"), get_field<double>(j, "r"),
                      get_field<int>(j, "x_next"), get_field<int>(j, "t")};
        if (tr.t == 0) ++ds.n_trajectories;
        ds.transitions.push_back(tr);
    }
    ds.validate();
    return ds;
}

VectorDataset read_vector_dataset_jsonl(std::istream& in, int n_actions) {
    VectorDataset ds;
    ds.n_actions = n_actions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const json j = parse_json_line(line, line_no);
        ds.entries.push_back({get_field<std::vector<double>>(j, "x"), get_field<int>(j, "a")});
    }
    ds.validate();
    return ds;
}

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
    out << kRecordsHeader << '\n';
    for (const auto& r : records) {
        out << r.seed << ',' << r.dataset_size << ',' << r.algorithm << ',' << r.baseline_mode << ','
            << format_double(r.raw_perf) << ',' << format_double(r.baseline_perf) << ','
            << format_double(r.optimal_perf) << ',' << format_double(r.normalized_perf) << ',';
        if (r.bounds) {
            out << format_double(r.bounds->zeta) << ',' << format_double(r.bounds->zeta_hat) << ','
                << format_double(r.bounds->delta_hat) << ',' << format_double(r.bounds->estimation_penalty);
        } else {
            out << ",,,";
        }
        out << '\n';
    }
}

std::vector<ExperimentRecord> read_records_csv(std::istream& in) {
    expect_header(in, kRecordsHeader);
    std::vector<ExperimentRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv(line);
        if (f.size() != 12) throw ValidationError("records CSV row must have 12 fields");
        ExperimentRecord r;
        r.seed = parse_int(f[0]);
        r.dataset_size = parse_int(f[1]);
        r.algorithm = f[2];
        r.baseline_mode = f[3];
        r.raw_perf = parse_double(f[4]);
        r.baseline_perf = parse_double(f[5]);
        r.optimal_perf = parse_double(f[6]);
        r.normalized_perf = parse_double(f[7]);
        if (!f[8].empty()) {
            BoundReport b;
            b.zeta = parse_double(f[8]);
            b.zeta_hat = parse_double(f[9]);
            b.delta_hat = parse_double(f[10]);
            b.estimation_penalty = parse_double(f[11]);
            r.bounds = b;
        }
        records.push_back(std::move(r));
    }
    return records;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << kSummaryHeader << '\n';
    for (const auto& r : rows) {
        out << r.algorithm << ',' << r.baseline_mode << ',' << r.dataset_size << ',' << format_double(r.mean) << ','
            << format_double(r.quantile_01) << ',' << format_double(r.quantile_10) << ',' << r.n << '\n';
    }
}

std::vector<SummaryRow> read_summary_csv(std::istream& in) {
    expect_header(in, kSummaryHeader);
    std::vector<SummaryRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv(line);
        if (f.size() != 7) throw ValidationError("summary CSV row must have 7 fields");
        rows.push_back({f[0], f[1], parse_int(f[2]), parse_double(f[3]), parse_double(f[4]), parse_double(f[5]),
                        parse_int(f[6])});
    }
    return rows;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw InvariantError("SHA-256 digest failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

} // namespace spibb::io
