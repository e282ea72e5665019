// Command-line front end: gen-data | train | eval | grid | report.
// Exit codes: 0 success, 1 usage or config error, 2 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smoothf1/smoothf1.hpp"

namespace fs = std::filesystem;
using namespace smoothf1;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Rejects concurrent invocations writing into the same output directory.
class DirLock {
public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".smoothf1.lock") {
        fs::create_directories(dir);
        file_ = std::fopen(path_.string().c_str(), "wx");
        if (!file_)
            throw std::runtime_error("output directory is locked by another invocation: " +
                                     dir.string() + " (stale? remove " + path_.string() + ")");
    }
    ~DirLock() {
        if (file_) {
            std::fclose(file_);
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path path_;
    std::FILE* file_ = nullptr;
};

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
};

ExperimentConfig load_config(const CommonArgs& args) {
    ConfigMap map;
    if (!args.config_path.empty())
        map = parse_config_file(args.config_path);
    for (const auto& item : args.overrides)
        apply_override(map, item);
    return config_from_map(map);
}

/// Output directory: --out wins over config output.dir; relative paths are
/// resolved against $SMOOTHF1_OUTPUT_ROOT when it is set.
fs::path resolve_output_dir(const ExperimentConfig& cfg, const CommonArgs& args) {
    std::string dir = args.out_dir.empty() ? cfg.output_dir : args.out_dir;
    if (dir.empty())
        throw ConfigError("no output directory: set output.dir in the config or pass --out");
    fs::path path(dir);
    if (path.is_relative())
        if (const char* root = std::getenv("SMOOTHF1_OUTPUT_ROOT"))
            path = fs::path(root) / path;
    return path;
}

int cmd_gen_data(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    if (cfg.data_kind != "synthetic")
        throw ConfigError("config key 'data.kind': gen-data requires 'synthetic'");
    const fs::path out = resolve_output_dir(cfg, args);
    DirLock lock(out);
    cfg.output_dir = out.string();
    persist_effective_config(cfg, out);
    const Dataset ds = generate_synthetic(cfg.synth);
    save_multilabel_file((out / "dataset.mld").string(), ds);
    json summary;
    summary["record"] = "dataset_summary";
    summary["n"] = ds.n();
    summary["classes"] = ds.n_classes();
    summary["feature_dim"] = ds.feature_dim();
    summary["mean_label_count"] = mean_label_count(ds);
    summary["provenance"] = ds.provenance;
    detail::write_text_file(out / "summary.json", summary.dump() + "\n");
    std::cout << summary.dump() << "\n";
    std::cout << "wrote " << (out / "dataset.mld").string() << "\n";
    return kExitOk;
}

int cmd_train(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    const fs::path out = resolve_output_dir(cfg, args);
    DirLock lock(out);
    cfg.output_dir = out.string();
    persist_effective_config(cfg, out);
    const Dataset dataset = load_experiment_dataset(cfg);
    const SplitDatasets splits = split(dataset, cfg.split_fractions, cfg.split_seed);
    detail::write_text_file(out / "splits.txt", detail::splits_to_text(splits.indices));
    train_phase(cfg, splits.train, out);
    std::size_t ok = 0, failed = 0;
    for (const auto& spec : cfg.losses)
        for (Seed seed : cfg.seeds) {
            const json status = json::parse(detail::read_text_file(
                out / "runs" / loss_kind_name(spec.kind) / ("seed_" + std::to_string(seed)) /
                "status.json"));
            (status.at("status") == "ok" ? ok : failed) += 1;
        }
    std::cout << "trained " << ok << " run(s), " << failed << " failed, under "
              << (out / "runs").string() << "\n";
    return kExitOk;
}

int cmd_eval(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    const fs::path out = resolve_output_dir(cfg, args);
    DirLock lock(out);
    cfg.output_dir = out.string();
    persist_effective_config(cfg, out);
    const Dataset dataset = load_experiment_dataset(cfg);
    const SplitDatasets splits = split(dataset, cfg.split_fractions, cfg.split_seed);
    const fs::path splits_file = out / "splits.txt";
    const std::string splits_text = detail::splits_to_text(splits.indices);
    if (fs::exists(splits_file) && detail::read_text_file(splits_file) != splits_text)
        throw std::runtime_error(
            "persisted split indices differ from this config's splits; refusing to evaluate "
            "against a different partition (" +
            splits_file.string() + ")");
    const RunReport report = eval_phase(cfg, splits.test, out);
    detail::write_text_file(out / "table.txt",
                            render_comparison_table(report, cfg.thresholds));
    std::cout << "evaluated " << report.runs.size() << " run(s); records in "
              << (out / "runs.jsonl").string() << "\n";
    return kExitOk;
}

int cmd_grid(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    const fs::path out = resolve_output_dir(cfg, args);
    DirLock lock(out);
    cfg.output_dir = out.string();
    persist_effective_config(cfg, out);
    const SensitivityGrid grid = grid_search(cfg);
    detail::write_text_file(out / "sensitivity.csv", grid_to_csv(grid));
    detail::write_text_file(out / "grid_cells.jsonl", grid_cells_jsonl(grid));
    if (grid.has_best)
        std::cout << "best cell: beta=" << grid.betas[grid.best_beta_index]
                  << " eta=" << grid.etas[grid.best_eta_index] << " " << grid.metric << "="
                  << grid.values(grid.best_beta_index, grid.best_eta_index) << "\n";
    else
        std::cout << "no successful cell\n";
    std::cout << "wrote " << (out / "sensitivity.csv").string() << "\n";
    return kExitOk;
}

int cmd_report(const CommonArgs& args) {
    fs::path out;
    if (!args.out_dir.empty() || args.config_path.empty()) {
        if (args.out_dir.empty())
            throw ConfigError("report: pass --out or a config with output.dir");
        ExperimentConfig dummy;
        CommonArgs args_copy = args;
        out = resolve_output_dir(dummy, args_copy);
    } else {
        const ExperimentConfig cfg = load_config(args);
        out = resolve_output_dir(cfg, args);
    }
    const RunReport report = load_report(out);
    const std::string table = render_comparison_table(report, report_thresholds(report));
    detail::write_text_file(out / "table.txt", table);
    std::cout << table;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "smoothf1: smooth confusion-matrix surrogate losses for multilabel "
        "classification -- dataset generation, head training, evaluation, and "
        "(beta, eta) sensitivity grids"};
    app.require_subcommand(1);

    CommonArgs args;
    const auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* config_opt =
            sub->add_option("-c,--config", args.config_path, "flat key = value config file");
        if (needs_config)
            config_opt->required();
        sub->add_option("-s,--set", args.overrides,
                        "override a config entry, dotted key=value (repeatable)");
        sub->add_option("-o,--out", args.out_dir,
                        "output directory (wins over output.dir; relative paths resolve "
                        "against $SMOOTHF1_OUTPUT_ROOT)");
    };

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic multilabel dataset file");
    add_common(gen, true);
    auto* train_cmd = app.add_subcommand(
        "train", "train one head per configured (loss, seed); writes checkpoints and traces");
    add_common(train_cmd, true);
    auto* eval_cmd = app.add_subcommand(
        "eval", "evaluate trained checkpoints at each configured threshold");
    add_common(eval_cmd, true);
    auto* grid_cmd = app.add_subcommand(
        "grid", "run the (beta, eta) sensitivity grid and emit its CSV matrix");
    add_common(grid_cmd, true);
    auto* report_cmd = app.add_subcommand(
        "report", "render the loss-by-metric comparison table from completed runs");
    add_common(report_cmd, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(args);
        if (train_cmd->parsed())
            return cmd_train(args);
        if (eval_cmd->parsed())
            return cmd_eval(args);
        if (grid_cmd->parsed())
            return cmd_grid(args);
        if (report_cmd->parsed())
            return cmd_report(args);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
