#include "groc/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "groc/errors.hpp"
#include "groc/eval.hpp"
#include "groc/graph_io.hpp"
#include "groc/trainer.hpp"

namespace groc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw DataError("cannot write " + file.string());
    os << text;
    if (!os) throw DataError("write failed: " + file.string());
}

std::string read_text(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw DataError("cannot read " + file.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

unsigned thread_count() {
    const char* env = std::getenv("GROC_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (*end != '\0' || v == 0) throw UsageError("GROC_THREADS must be a positive integer");
    return unsigned(std::min<unsigned long>(v, 256));
}

// Output directory must be absent or empty unless forced.
void prepare_out_dir(const fs::path& dir, bool force, std::span<const std::string> owned) {
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw UsageError("output path is not a directory: " + dir.string());
        if (!fs::is_empty(dir)) {
            if (!force) throw UsageError("output directory is not empty (use --force): " + dir.string());
            for (const auto& name : owned) fs::remove_all(dir / name);
        }
    }
    fs::create_directories(dir);
}

std::vector<std::size_t> parse_list(const std::string& s, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || item.front() == '-')
            throw UsageError(std::string("invalid ") + what + " entry '" + item + "'");
        out.push_back(std::size_t(v));
    }
    return out;
}

// ---- generate --------------------------------------------------------------------

struct GenerateArgs {
    std::string preset;
    std::string sizes;
    std::optional<double> p_in, p_out, flip;
    std::uint64_t seed = 7;
    std::string out;
    bool force = false;
};

void cmd_generate(const GenerateArgs& a, std::ostream& out) {
    if (!a.preset.empty() && a.preset != "sbm") throw UsageError("unknown generator preset '" + a.preset + "'");
    SbmSpec spec;
    spec.seed = a.seed;
    if (!a.sizes.empty()) spec.block_sizes = parse_list(a.sizes, "block size");
    if (a.p_in) spec.p_in = *a.p_in;
    if (a.p_out) spec.p_out = *a.p_out;
    if (a.flip) spec.feature_flip = *a.flip;
    const Graph g = sbm_generate(spec);
    static const std::vector<std::string> owned = {"features.csv", "edges.csv", "labels.csv", "splits.json"};
    prepare_out_dir(a.out, a.force, owned);
    save_graph(g, a.out);
    out << "wrote " << g.num_nodes() << " nodes, " << g.num_edges() << " edges to " << a.out << '\n';
}

// ---- train -------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string method;
    std::string preset = "sbm";
    std::vector<std::string> config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool force = false;
};

// Defaults < preset < JSON config files < key=value overrides < --seed.
TrainConfig resolve_config(const TrainArgs& a) {
    TrainConfig cfg = preset(a.preset, parse_method(a.method));
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& item : a.config) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(read_text(item));
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("config file " + item + ": " + e.what());
            }
            apply_json(cfg, j);
        } else {
            overrides.emplace_back(item.substr(0, eq), item.substr(eq + 1));
        }
    }
    for (const auto& [k, v] : overrides) apply_override(cfg, k, v);
    if (a.seed) cfg.seed = *a.seed;
    cfg.validate();
    return cfg;
}

void cmd_train(const TrainArgs& a, std::ostream& out) {
    const TrainConfig cfg = resolve_config(a);
    const Graph g = load_graph(a.data);
    static const std::vector<std::string> owned = {"checkpoint", "embeddings.csv", "report.csv",
                                                   "config.json", "manifest.json"};
    prepare_out_dir(a.out, a.force, owned);

    const std::string started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult res = train(g, cfg, [&](const EpochStats& s) {
        out << "epoch " << s.epoch << " loss " << format_double(s.loss) << '\n';
    });
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path dir(a.out);
    const std::string config_text = to_json(cfg).dump(2) + "\n";
    write_text(dir / "config.json", config_text);
    save_checkpoint(res.params, {cfg.seed, to_string(cfg.method)}, dir / "checkpoint");
    write_matrix_csv(embed(g, res.params.encoder), dir / "embeddings.csv");
    write_text(dir / "report.csv", report_csv(res.report));

    ordered_json m;
    m["config_hash"] = "fnv1a64:" + hex(fnv1a(config_text));
    m["seed"] = cfg.seed;
    m["dataset"] = fs::absolute(a.data).lexically_normal().string();
    m["method"] = to_string(cfg.method);
    m["artifacts"] = {{"config", "config.json"},
                      {"checkpoint", "checkpoint"},
                      {"embeddings", "embeddings.csv"},
                      {"report", "report.csv"}};
    m["zero_norm_rows"] = res.report.zero_norm_rows;
    m["started"] = started;
    m["finished"] = utc_now();
    m["seconds"] = seconds;
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

// ---- eval ----------------------------------------------------------------------------

struct EvalArgs {
    std::string data;
    std::string embeddings;
    std::string checkpoint;
    std::string budgets;
    std::uint64_t seed = 0;
    std::string out;
    std::string method;
    std::string dataset;
    bool force = false;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.embeddings.empty() && a.checkpoint.empty())
        throw UsageError("eval needs --embeddings or --checkpoint");
    const std::vector<std::size_t> budgets = parse_list(a.budgets, "budget");
    const bool attack = !budgets.empty();
    if (attack && a.checkpoint.empty())
        throw UsageError("attack budgets require --checkpoint (the graph must be re-encoded)");

    const Graph g = load_graph(a.data);
    if (!g.labels() || !g.splits()) throw DataError("eval needs labels.csv and splits.json");

    std::optional<ModelParams> params;
    CheckpointInfo info;
    if (!a.checkpoint.empty()) params = load_checkpoint(a.checkpoint, &info);

    const DenseMatrix z = a.embeddings.empty() ? embed(g, params->encoder) : read_matrix_csv(a.embeddings);
    if (z.rows() != g.num_nodes()) throw DataError("embeddings row count does not match the graph");

    const LinearProbe probe = linear_probe_train(z, *g.labels(), g.splits()->train, g.num_classes(), a.seed);
    const double acc = accuracy(predict(probe, z), *g.labels(), g.splits()->test);

    const std::string method = !a.method.empty() ? a.method : !info.method.empty() ? info.method : "unknown";
    const std::string dataset =
        !a.dataset.empty() ? a.dataset : fs::absolute(a.data).lexically_normal().filename().string();

    static const std::vector<std::string> owned = {"results.csv", "attacks.json"};
    prepare_out_dir(a.out, a.force, owned);

    std::ostringstream csv;
    csv << "method,dataset,seed,Acc";
    std::vector<std::size_t> sorted = budgets;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (auto b : sorted) csv << ",robust@" << b;
    csv << '\n' << method << ',' << dataset << ',' << a.seed << ',' << format_double(acc);

    ordered_json audit;
    audit["method"] = method;
    audit["dataset"] = dataset;
    audit["seed"] = a.seed;
    audit["Acc"] = acc;
    if (attack) {
        const SurrogateModel s = surrogate_fit(g, a.seed);
        const TargetSet targets = select_targets(s, g, a.seed);
        const auto all = targets.all();
        const RobustnessReport rep = robust_accuracy(params->encoder, probe, g, all, s, sorted, thread_count());
        for (std::size_t i = 0; i < rep.budgets.size(); ++i)
            if (rep.budgets[i] != 0 || std::find(sorted.begin(), sorted.end(), 0) != sorted.end())
                csv << ',' << format_double(rep.accuracy[i]);
        audit["budgets"] = rep.budgets;
        audit["robust_accuracy"] = rep.accuracy;
        audit["robust_accuracy_pre_attack_correct"] = rep.accuracy_if_clean;
        audit["targets"] = {{"easiest", targets.easiest}, {"hardest", targets.hardest}, {"random", targets.random}};
        auto attacks = ordered_json::array();
        for (std::size_t i = 0; i < rep.attacks.size(); ++i) {
            ordered_json j = to_json(rep.attacks[i]);
            j["probe_predictions"] = rep.predictions[i];
            j["label"] = (*g.labels())[all[i]];
            attacks.push_back(j);
        }
        audit["attacks"] = attacks;
    }
    csv << '\n';
    write_text(fs::path(a.out) / "results.csv", csv.str());
    write_text(fs::path(a.out) / "attacks.json", audit.dump(2) + "\n");
    out << csv.str();
}

// ---- report ------------------------------------------------------------------------

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void cmd_report(const std::string& runs, const std::string& out_file, std::ostream& out) {
    if (!fs::is_directory(runs)) throw DataError("runs directory not found: " + runs);
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(runs))
        if (e.is_regular_file() && e.path().filename() == "results.csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no results.csv under " + runs);

    std::vector<std::string> header;
    std::map<std::pair<std::string, std::string>, std::vector<std::vector<double>>> groups;
    for (const auto& f : files) {
        std::istringstream is(read_text(f));
        std::string line;
        std::getline(is, line);
        const auto h = split_csv_line(line);
        if (h.size() < 4 || h[0] != "method" || h[1] != "dataset" || h[2] != "seed")
            throw DataError("malformed results header in " + f.string());
        if (header.empty()) header = h;
        else if (h != header) throw DataError("inconsistent columns in " + f.string());
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto cells = split_csv_line(line);
            if (cells.size() != h.size()) throw DataError("row width mismatch in " + f.string());
            std::vector<double> vals;
            for (std::size_t c = 3; c < cells.size(); ++c) {
                try {
                    vals.push_back(std::stod(cells[c]));
                } catch (const std::exception&) {
                    throw DataError("non-numeric cell '" + cells[c] + "' in " + f.string());
                }
            }
            groups[{cells[0], cells[1]}].push_back(std::move(vals));
        }
    }

    std::ostringstream os;
    os << "method,dataset,runs";
    for (std::size_t c = 3; c < header.size(); ++c) os << ',' << header[c] << "_mean," << header[c] << "_std";
    os << '\n';
    for (const auto& [key, rows] : groups) {
        os << key.first << ',' << key.second << ',' << rows.size();
        for (std::size_t c = 0; c + 3 < header.size(); ++c) {
            double mean = 0.0;
            for (const auto& r : rows) mean += r[c];
            mean /= double(rows.size());
            double var = 0.0;
            for (const auto& r : rows) var += (r[c] - mean) * (r[c] - mean);
            const double sd = rows.size() > 1 ? std::sqrt(var / double(rows.size() - 1)) : 0.0;
            os << ',' << format_double(mean) << ',' << format_double(sd);
        }
        os << '\n';
    }
    const fs::path target(out_file);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    write_text(target, os.str());
    out << os.str();
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"groc: robust graph contrastive learning"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a stochastic block model dataset");
    g->add_option("--preset", gen.preset, "Generator preset (sbm)");
    g->add_option("--sizes", gen.sizes, "Comma-separated block sizes");
    g->add_option("--p-in", gen.p_in, "Intra-block edge probability");
    g->add_option("--p-out", gen.p_out, "Inter-block edge probability");
    g->add_option("--feature-flip", gen.flip, "Feature bit flip probability");
    g->add_option("--seed", gen.seed, "Random seed");
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_flag("--force", gen.force, "Overwrite an existing dataset");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train an encoder");
    t->add_option("--data", tr.data, "Dataset directory")->required();
    t->add_option("--method", tr.method, "grace | gca-de | grace-adv | groc")->required();
    t->add_option("--preset", tr.preset, "Hyperparameter preset (sbm, cora, citeseer)");
    t->add_option("--config", tr.config, "JSON config file or key=value override (repeatable)");
    t->add_option("--seed", tr.seed, "Random seed");
    t->add_option("--out", tr.out, "Output directory")->required();
    t->add_flag("--force", tr.force, "Overwrite existing outputs");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Linear evaluation and evasion attacks");
    e->add_option("--data", ev.data, "Dataset directory")->required();
    e->add_option("--embeddings", ev.embeddings, "Embeddings CSV");
    e->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory");
    e->add_option("--attack-budgets", ev.budgets, "Comma-separated budgets, e.g. 1,2,3,4,5");
    e->add_option("--seed", ev.seed, "Random seed");
    e->add_option("--out", ev.out, "Output directory")->required();
    e->add_option("--method", ev.method, "Method label for the results row");
    e->add_option("--dataset", ev.dataset, "Dataset label for the results row");
    e->add_flag("--force", ev.force, "Overwrite existing outputs");

    std::string runs, table;
    auto* r = app.add_subcommand("report", "Aggregate results over seeds");
    r->add_option("--runs", runs, "Directory searched for results.csv files")->required();
    r->add_option("--out", table, "Output table CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        std::ostringstream o, eo;
        const int code = app.exit(ex, o, eo);
        out << o.str();
        err << eo.str();
        return code == 0 ? ok : usage;
    }

    try {
        if (*g) cmd_generate(gen, out);
        else if (*t) cmd_train(tr, out);
        else if (*e) cmd_eval(ev, out);
        else if (*r) cmd_report(runs, table, out);
        return ok;
    } catch (const UsageError& ex) {
        err << "error: " << ex.what() << '\n';
        return usage;
    } catch (const ConfigError& ex) {
        err << "config error: " << ex.what() << '\n';
        return usage;
    } catch (const NumericalError& ex) {
        err << "numerical error: " << ex.what() << '\n';
        return numerical;
    } catch (const DataError& ex) {
        err << "data error: " << ex.what() << '\n';
        return data;
    } catch (const ShapeError& ex) {
        err << "data error: " << ex.what() << '\n';
        return data;
    } catch (const std::invalid_argument& ex) {
        err << "error: " << ex.what() << '\n';
        return usage;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return failure;
    }
}

} // namespace groc::cli
