// bloodflow: generate datasets, run allocation scenarios, forecast acceptance
// ratios and compare runs.
//
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.

#include "bloodflow/bloodflow.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kGenerateSchema = "bloodflow/generate@1";
constexpr const char* kSimulateSchema = "bloodflow/simulate@1";

struct UsageError : bloodflow::ValidationError {
    using bloodflow::ValidationError::ValidationError;
};

std::string env_data_dir() {
    const char* v = std::getenv("BLOODFLOW_DATA_DIR");
    return v ? v : "";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw bloodflow::Error("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json load_config(const std::string& path, const char* schema, const std::set<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path + "'", "config");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("not valid JSON: ") + e.what(), "config");
    }
    if (!j.is_object()) throw UsageError("must be a JSON object", "config");
    if (!j.contains("schema") || j["schema"] != schema)
        throw UsageError(std::string("must be \"") + schema + "\"", "schema");
    for (const auto& [key, value] : j.items())
        if (key != "schema" && !allowed.contains(key)) throw UsageError("unknown field", key);
    return j;
}

template <class T>
void take(const json& cfg, const char* key, T& target) {
    if (!cfg.contains(key)) return;
    try {
        target = cfg.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError("wrong type", key);
    }
}

json manifest(const std::string& command, const std::vector<std::string>& args, const std::string& config_path,
              std::uint64_t seed, const std::string& dataset_hash, const std::vector<std::string>& outputs) {
    return {{"tool", "bloodflow"},
            {"version", bloodflow::kVersion},
            {"command", command},
            {"argv", args},
            {"config_path", config_path},
            {"seed", seed},
            {"dataset_hash", dataset_hash},
            {"outputs", outputs}};
}

// ---- generate ------------------------------------------------------------

struct GenerateArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> n_banks, n_users, n_transactions, pre_window_days;
    std::optional<std::string> start_date;
};

int cmd_generate(const GenerateArgs& a, const std::vector<std::string>& argv) {
    bloodflow::GenConfig cfg;
    if (!a.config.empty()) {
        const json j = load_config(a.config, kGenerateSchema,
                                   {"n_banks", "n_users", "n_seed_transactions", "start_date", "pre_window_days", "seed"});
        take(j, "n_banks", cfg.n_banks);
        take(j, "n_users", cfg.n_users);
        take(j, "n_seed_transactions", cfg.n_seed_transactions);
        take(j, "pre_window_days", cfg.pre_window_days);
        take(j, "seed", cfg.seed);
        if (j.contains("start_date")) {
            std::string d;
            take(j, "start_date", d);
            cfg.start_date = bloodflow::Date::parse(d);
        }
    }
    if (a.seed) cfg.seed = *a.seed;
    if (a.n_banks) cfg.n_banks = *a.n_banks;
    if (a.n_users) cfg.n_users = *a.n_users;
    if (a.n_transactions) cfg.n_seed_transactions = *a.n_transactions;
    if (a.pre_window_days) cfg.pre_window_days = *a.pre_window_days;
    if (a.start_date) cfg.start_date = bloodflow::Date::parse(*a.start_date);
    cfg.validate();

    const fs::path out = a.out.empty() ? fs::path(env_data_dir()) : fs::path(a.out);
    if (out.empty()) throw UsageError("no output directory (use --out or BLOODFLOW_DATA_DIR)", "out");

    const bloodflow::Dataset ds = bloodflow::generate_dataset(cfg);
    bloodflow::write_dataset(out, ds);
    const std::string hash = bloodflow::dataset_hash(out);
    std::vector<std::string> outputs;
    for (auto name : bloodflow::kDatasetFiles) outputs.push_back((out / name).string());
    write_json(out / "manifest.json", manifest("generate", argv, a.config, cfg.seed, hash, outputs));

    std::cout << json{{"banks", ds.banks.size()},
                      {"users", ds.users.size()},
                      {"inventory", ds.inventory.size()},
                      {"transactions", ds.transactions.size()},
                      {"dataset_hash", hash}}
                     .dump()
              << "\n";
    return 0;
}

// ---- simulate ------------------------------------------------------------

struct SimulateArgs {
    std::string dataset, config, out;
    std::optional<std::string> policy, start_date;
    std::optional<int> days;
    std::optional<std::uint64_t> seed;
    std::optional<double> proximity_fraction, request_probability;
    bool no_store = false;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
    bloodflow::ScenarioConfig cfg;
    if (!a.config.empty()) {
        const json j = load_config(a.config, kSimulateSchema,
                                   {"policy", "n_days", "seed", "start_date", "daily_events_min", "daily_events_max",
                                    "request_probability", "proximity_fraction", "request_quantity",
                                    "donation_quantity"});
        if (j.contains("policy")) {
            std::string p;
            take(j, "policy", p);
            cfg.policy = bloodflow::parse_policy(p);
        }
        if (j.contains("start_date")) {
            std::string d;
            take(j, "start_date", d);
            cfg.start_date = bloodflow::Date::parse(d);
        }
        take(j, "n_days", cfg.n_days);
        take(j, "seed", cfg.seed);
        take(j, "daily_events_min", cfg.daily_events_min);
        take(j, "daily_events_max", cfg.daily_events_max);
        take(j, "request_probability", cfg.request_probability);
        take(j, "proximity_fraction", cfg.proximity_fraction);
        take(j, "request_quantity", cfg.request_quantity);
        take(j, "donation_quantity", cfg.donation_quantity);
    }
    if (a.policy) cfg.policy = bloodflow::parse_policy(*a.policy);
    if (a.days) cfg.n_days = *a.days;
    if (a.seed) cfg.seed = *a.seed;
    if (a.start_date) cfg.start_date = bloodflow::Date::parse(*a.start_date);
    if (a.proximity_fraction) cfg.proximity_fraction = *a.proximity_fraction;
    if (a.request_probability) cfg.request_probability = *a.request_probability;
    cfg.validate();

    const fs::path dataset_dir = a.dataset.empty() ? fs::path(env_data_dir()) : fs::path(a.dataset);
    if (dataset_dir.empty()) throw UsageError("no dataset directory (use --dataset or BLOODFLOW_DATA_DIR)", "dataset");
    const fs::path out(a.out);
    fs::create_directories(out);

    const bloodflow::Dataset ds = bloodflow::read_dataset(dataset_dir);
    const std::string hash = bloodflow::dataset_hash(dataset_dir);

    std::vector<std::string> outputs{(out / "report.json").string(), (out / "acceptance_series.csv").string()};
    bloodflow::SimReport rep;
    if (a.no_store) {
        rep = bloodflow::run_simulation(cfg, ds);
    } else {
        const fs::path store_dir = out / "store";
        fs::remove_all(store_dir);
        bloodflow::Store store(store_dir);
        store.load(ds);
        rep = bloodflow::run_simulation(cfg, store);
        store.close();
        outputs.push_back(store_dir.string());
    }

    json report = bloodflow::report_to_json(rep);
    report["dataset_hash"] = hash;
    write_json(out / "report.json", report);
    bloodflow::write_acceptance_series(out / "acceptance_series.csv", rep.per_bank_daily);
    write_json(out / "manifest.json", manifest("simulate", argv, a.config, cfg.seed, hash, outputs));
    std::cout << bloodflow::summary_line(rep).dump() << "\n";
    return 0;
}

// ---- forecast ------------------------------------------------------------

struct ForecastArgs {
    std::string series, model = "linear", arima_order = "1,1,1", out;
    int train_len = 170, horizon = 10;
    bloodflow::LstmConfig lstm;
};

int cmd_forecast(const ForecastArgs& a, const std::vector<std::string>& argv) {
    std::vector<bloodflow::ModelConfig> configs;
    const auto order = bloodflow::parse_arima_order(a.arima_order);
    auto add = [&](bloodflow::ModelKind k) { configs.push_back({k, order, a.lstm}); };
    if (a.model == "all") {
        add(bloodflow::ModelKind::linear);
        add(bloodflow::ModelKind::arima);
        add(bloodflow::ModelKind::lstm);
    } else {
        add(bloodflow::parse_model_kind(a.model));
    }

    const auto series = bloodflow::read_acceptance_series(a.series);
    if (series.empty()) throw UsageError("no rows", "series");
    const auto tasks = bloodflow::tasks_from_series(series, a.train_len, a.horizon);

    const fs::path out(a.out);
    fs::create_directories(out);
    std::vector<std::string> outputs;
    json all = json::array();
    for (const auto& cfg : configs) {
        const auto res = bloodflow::evaluate_model(tasks, cfg);
        const json j = res;
        all.push_back(j);
        const fs::path json_path = out / ("forecast_eval_" + res.model + ".json");
        const fs::path csv_path = out / ("forecast_" + res.model + ".csv");
        write_json(json_path, j);
        std::string csv = "bank_id,predicted,actual,percent_difference,fallback\n";
        char buf[160];
        for (const auto& b : res.per_bank) {
            std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%d\n", b.bank_id, b.predicted, b.actual,
                          b.percent_difference, b.fallback ? 1 : 0);
            csv += buf;
        }
        write_text(csv_path, csv);
        outputs.push_back(json_path.string());
        outputs.push_back(csv_path.string());
        std::cout << json{{"model", res.model}, {"mean_percent_difference", res.mean_percent_difference}}.dump()
                  << "\n";
    }
    write_json(out / "forecast_eval.json", all.size() == 1 ? all[0] : all);
    outputs.push_back((out / "forecast_eval.json").string());
    write_json(out / "manifest.json",
               manifest("forecast", argv, "", a.lstm.init_seed, bloodflow::hash_files({a.series}), outputs));
    return 0;
}

// ---- compare / report ----------------------------------------------------

bloodflow::RunSummary load_summary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open report '" + path + "'", "report");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("not valid JSON: ") + e.what(), "report");
    }
    return bloodflow::summary_from_json(j);
}

int cmd_compare(const std::string& a_path, const std::string& b_path, const std::string& out_dir,
                const std::vector<std::string>& argv) {
    const auto cmp = bloodflow::compare_runs(load_summary(a_path), load_summary(b_path));
    const json j = bloodflow::to_json(cmp);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json(fs::path(out_dir) / "comparison.json", j);
        write_text(fs::path(out_dir) / "comparison.txt", bloodflow::comparison_table(cmp));
        write_json(fs::path(out_dir) / "manifest.json",
                   manifest("compare", argv, "", 0, bloodflow::hash_files({a_path, b_path}),
                            {(fs::path(out_dir) / "comparison.json").string(),
                             (fs::path(out_dir) / "comparison.txt").string()}));
    }
    std::cout << j.dump() << "\n";
    return 0;
}

// Metrics table across runs plus each run's marginal performance against the first.
int cmd_report(const std::vector<std::string>& paths, const std::string& out_dir) {
    std::vector<bloodflow::RunSummary> runs;
    for (const auto& p : paths) runs.push_back(load_summary(p));
    std::string text;
    char buf[256];
    auto row = [&](const char* name, auto&& cell) {
        std::snprintf(buf, sizeof buf, "%-26s", name);
        text += buf;
        for (const auto& r : runs) text += cell(r);
        text += "\n";
    };
    auto fmt = [&](const char* f, auto v) {
        std::snprintf(buf, sizeof buf, f, v);
        return std::string(buf);
    };
    row("Metric", [&](const auto& r) { return fmt(" %28s", r.label.c_str()); });
    row("Total Accepted Requests", [&](const auto& r) { return fmt(" %28ld", r.accepted); });
    row("Total Denied Requests", [&](const auto& r) { return fmt(" %28ld", r.denied); });
    row("Overall Acceptance Ratio", [&](const auto& r) { return fmt(" %28.4f", r.acceptance()); });
    row("Total Units Traveled", [&](const auto& r) { return fmt(" %28.0f", r.total_distance); });
    text += "\nTransition            dMP(accept)  dist.reduced        z          p\n";
    for (std::size_t i = 1; i < runs.size(); ++i) {
        const auto c = bloodflow::compare_runs(runs[0], runs[i]);
        std::snprintf(buf, sizeof buf, "R1 to R%-14zu %10.1f%% %12.2f%% %8.3f %10.6f\n", i + 1,
                      100.0 * c.delta_mp_acceptance, 100.0 * c.distance_reduction_fraction, c.z, c.p_one_sided);
        text += buf;
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text(fs::path(out_dir) / "report.txt", text);
    }
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bloodflow: blood-bank allocation simulator and analysis toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", bloodflow::kVersion);
    const std::vector<std::string> args(argv + 1, argv + argc);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Generate a synthetic dataset");
    g->add_option("--config", gen.config, "JSON config (schema bloodflow/generate@1)");
    g->add_option("--out", gen.out, "Output directory (default: $BLOODFLOW_DATA_DIR)");
    g->add_option("--seed", gen.seed);
    g->add_option("--n-banks", gen.n_banks);
    g->add_option("--n-users", gen.n_users);
    g->add_option("--n-transactions", gen.n_transactions);
    g->add_option("--pre-window-days", gen.pre_window_days);
    g->add_option("--start-date", gen.start_date);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Run an allocation scenario over a dataset");
    s->add_option("--dataset", sim.dataset, "Dataset directory (default: $BLOODFLOW_DATA_DIR)");
    s->add_option("--config", sim.config, "JSON config (schema bloodflow/simulate@1)");
    s->add_option("--policy", sim.policy, "random | heuristic_proximity_expiry | heuristic_rarity");
    s->add_option("--days", sim.days);
    s->add_option("--seed", sim.seed);
    s->add_option("--start-date", sim.start_date);
    s->add_option("--proximity-fraction", sim.proximity_fraction);
    s->add_option("--request-probability", sim.request_probability);
    s->add_flag("--no-store", sim.no_store, "Keep the store in memory instead of writing out/store");
    s->add_option("--out", sim.out, "Output directory")->required();

    ForecastArgs fc;
    auto* f = app.add_subcommand("forecast", "Forecast per-bank acceptance ratios");
    f->add_option("--series", fc.series, "acceptance_series.csv")->required();
    f->add_option("--model", fc.model, "linear | arima | lstm | all")->capture_default_str();
    f->add_option("--arima-order", fc.arima_order, "p,d,q")->capture_default_str();
    f->add_option("--train-len", fc.train_len)->capture_default_str();
    f->add_option("--horizon", fc.horizon)->capture_default_str();
    f->add_option("--lstm-lookback", fc.lstm.lookback)->capture_default_str();
    f->add_option("--lstm-hidden", fc.lstm.hidden)->capture_default_str();
    f->add_option("--lstm-epochs", fc.lstm.epochs)->capture_default_str();
    f->add_option("--lstm-learn-rate", fc.lstm.learn_rate)->capture_default_str();
    f->add_option("--lstm-seed", fc.lstm.init_seed)->capture_default_str();
    f->add_option("--out", fc.out, "Output directory")->required();

    std::string report_a, report_b, compare_out;
    auto* c = app.add_subcommand("compare", "Compare a baseline report with a treatment report");
    c->add_option("baseline", report_a, "Baseline report.json")->required();
    c->add_option("treatment", report_b, "Treatment report.json")->required();
    c->add_option("--out", compare_out, "Directory for comparison.json and comparison.txt");

    std::vector<std::string> report_paths;
    std::string report_out;
    auto* r = app.add_subcommand("report", "Tabulate several report.json files");
    r->add_option("reports", report_paths, "report.json files; the first is the baseline")->required();
    r->add_option("--out", report_out, "Directory for report.txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*g) return cmd_generate(gen, args);
        if (*s) return cmd_simulate(sim, args);
        if (*f) return cmd_forecast(fc, args);
        if (*c) return cmd_compare(report_a, report_b, compare_out, args);
        if (*r) return cmd_report(report_paths, report_out);
    } catch (const bloodflow::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
