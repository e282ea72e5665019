#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smoothf1/checkpoint.hpp"
#include "smoothf1/config.hpp"
#include "smoothf1/data.hpp"
#include "smoothf1/losses.hpp"
#include "smoothf1/metrics.hpp"
#include "smoothf1/model.hpp"

namespace smoothf1 {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Robust aggregation.
// ---------------------------------------------------------------------------

/// Linear-interpolation quantile of a sample: h = (n-1)q, interpolate between
/// the two straddling order statistics.
inline double quantile_linear(std::vector<double> values, double q) {
    require(!values.empty(), "quantile_linear: empty sample");
    require(q >= 0.0 && q <= 1.0, "quantile_linear: q must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size())
        return values.back();
    const double frac = h - std::floor(h);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

struct AggregateStats {
    double mean = 0.0;
    double median = 0.0;
    double iqr = 0.0;  // Q3 - Q1
};

inline AggregateStats aggregate_stats(const std::vector<double>& values) {
    require(!values.empty(), "aggregate_stats: empty sample");
    AggregateStats out;
    double sum = 0.0;
    for (double v : values)
        sum += v;
    out.mean = sum / static_cast<double>(values.size());
    out.median = quantile_linear(values, 0.5);
    out.iqr = quantile_linear(values, 0.75) - quantile_linear(values, 0.25);
    return out;
}

// ---------------------------------------------------------------------------
// Run records.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& report_metric_names() {
    static const std::vector<std::string> names = {"weighted_f1", "micro_f1", "macro_f1",
                                                   "precision", "recall", "map"};
    return names;
}

struct RunRecord {
    std::string loss;
    Seed seed = 0;
    bool failed = false;
    std::string error;
    std::vector<double> trace;                 // full for ok runs, prefix for failed
    std::map<double, MetricReport> by_threshold;
};

struct LossAggregate {
    std::string loss;
    double threshold = 0.0;
    std::size_t n_runs = 0;
    std::map<std::string, AggregateStats> per_metric;
};

struct RunReport {
    std::vector<RunRecord> runs;
    std::vector<LossAggregate> aggregates;
    std::vector<std::string> all_failed_losses;  // excluded from comparison tables
};

/// Recomputes per-loss statistics from individual run records.
inline std::vector<LossAggregate> aggregate_runs(const std::vector<RunRecord>& runs,
                                                 const std::vector<std::string>& loss_order,
                                                 const std::vector<double>& thresholds) {
    std::vector<LossAggregate> out;
    for (const auto& loss : loss_order) {
        for (double t : thresholds) {
            LossAggregate agg;
            agg.loss = loss;
            agg.threshold = t;
            std::map<std::string, std::vector<double>> samples;
            for (const auto& run : runs) {
                if (run.loss != loss || run.failed)
                    continue;
                const auto it = run.by_threshold.find(t);
                if (it == run.by_threshold.end())
                    continue;
                for (const auto& name : report_metric_names())
                    samples[name].push_back(metric_by_name(it->second, name));
            }
            if (samples.empty() || samples.begin()->second.empty())
                continue;
            agg.n_runs = samples.begin()->second.size();
            for (const auto& [name, values] : samples)
                agg.per_metric[name] = aggregate_stats(values);
            out.push_back(std::move(agg));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization (newline-delimited flat JSON records).
// ---------------------------------------------------------------------------

namespace detail {

inline void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write file: " + path.string());
    out << content;
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline std::string trace_to_csv(const std::vector<double>& trace) {
    std::ostringstream out;
    out << "step,loss\n";
    char buffer[40];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buffer, sizeof(buffer), "%.17g", trace[i]);
        out << i << "," << buffer << "\n";
    }
    return out.str();
}

inline std::vector<double> trace_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> trace;
    while (std::getline(in, line)) {
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos)
            continue;
        trace.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
    }
    return trace;
}

}  // namespace detail

inline json run_record_to_json(const RunRecord& run, double threshold) {
    json record;
    record["record"] = "run";
    record["loss"] = run.loss;
    record["seed"] = run.seed;
    record["status"] = "ok";
    const MetricReport& report = run.by_threshold.at(threshold);
    for (const auto& [key, value] : metric_report_fields(report))
        record[key] = value;
    return record;
}

inline json failed_record_to_json(const RunRecord& run) {
    json record;
    record["record"] = "run";
    record["loss"] = run.loss;
    record["seed"] = run.seed;
    record["status"] = "failed";
    record["error"] = run.error;
    std::ostringstream prefix;
    char buffer[40];
    const std::size_t keep = std::min<std::size_t>(run.trace.size(), 32);
    for (std::size_t i = 0; i < keep; ++i) {
        std::snprintf(buffer, sizeof(buffer), "%.17g", run.trace[i]);
        if (i)
            prefix << ",";
        prefix << buffer;
    }
    record["trace_prefix"] = prefix.str();
    return record;
}

inline json aggregate_to_json(const LossAggregate& agg) {
    json record;
    record["record"] = "aggregate";
    record["loss"] = agg.loss;
    record["threshold"] = agg.threshold;
    record["n_runs"] = agg.n_runs;
    for (const auto& [name, stats] : agg.per_metric) {
        record[name + "_mean"] = stats.mean;
        record[name + "_median"] = stats.median;
        record[name + "_iqr"] = stats.iqr;
    }
    return record;
}

// ---------------------------------------------------------------------------
// Experiment pipeline.
// ---------------------------------------------------------------------------

inline Dataset load_experiment_dataset(const ExperimentConfig& cfg) {
    if (cfg.data_kind == "file")
        return load_multilabel_file(cfg.data_path).dataset;
    return generate_synthetic(cfg.synth);
}

namespace detail {

inline fs::path run_dir(const fs::path& out, const std::string& loss, Seed seed) {
    return out / "runs" / loss / ("seed_" + std::to_string(seed));
}

inline std::string splits_to_text(const SplitIndices& idx) {
    std::ostringstream out;
    const auto dump = [&](const char* name, const std::vector<std::size_t>& v) {
        out << name;
        for (std::size_t i : v)
            out << " " << i;
        out << "\n";
    };
    dump("train", idx.train);
    dump("val", idx.val);
    dump("test", idx.test);
    return out.str();
}

}  // namespace detail

/// Writes the effective config into the output directory; every
/// artifact-producing command calls this before any work.
inline void persist_effective_config(const ExperimentConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    detail::write_text_file(out_dir / "config.effective",
                            serialize_config(config_to_map(cfg)));
}

/// Trains every (loss, seed) pair that has no completed run directory yet.
/// Runs that diverge are recorded as failed (with the loss-trace prefix) and
/// the sweep continues. Checkpoints, traces and a status file land under
/// runs/<loss>/seed_<seed>/.
inline void train_phase(const ExperimentConfig& cfg, const Dataset& train_split,
                        const fs::path& out_dir) {
    for (const auto& spec : cfg.losses) {
        const std::string loss_name = loss_kind_name(spec.kind);
        for (Seed seed : cfg.seeds) {
            const fs::path dir = detail::run_dir(out_dir, loss_name, seed);
            if (fs::exists(dir / "status.json"))
                continue;  // crash-resumable at run granularity
            fs::create_directories(dir);
            HeadModel model =
                init_head(train_split.feature_dim(), cfg.hidden_dim, train_split.n_classes(), seed);
            json status;
            try {
                TrainResult result = train(std::move(model), train_split,
                                           cfg.train_config(spec), seed);
                save_checkpoint((dir / "checkpoint.txt").string(), result.model, spec, seed);
                detail::write_text_file(dir / "trace.csv",
                                        detail::trace_to_csv(result.loss_trace));
                status["status"] = "ok";
            } catch (const TrainingDiverged& e) {
                detail::write_text_file(dir / "trace.csv",
                                        detail::trace_to_csv(e.trace_prefix));
                status["status"] = "failed";
                status["error"] = e.what();
            }
            detail::write_text_file(dir / "status.json", status.dump() + "\n");
        }
    }
}

/// Evaluates every completed run on the test split and writes runs.jsonl and
/// aggregates.jsonl (full rewrite; record order follows the config).
inline RunReport eval_phase(const ExperimentConfig& cfg, const Dataset& test_split,
                            const fs::path& out_dir) {
    RunReport report;
    std::vector<std::string> loss_order;
    for (const auto& spec : cfg.losses) {
        const std::string loss_name = loss_kind_name(spec.kind);
        loss_order.push_back(loss_name);
        std::size_t ok_runs = 0;
        for (Seed seed : cfg.seeds) {
            const fs::path dir = detail::run_dir(out_dir, loss_name, seed);
            if (!fs::exists(dir / "status.json"))
                throw std::runtime_error("missing run (train first): " + dir.string());
            const json status = json::parse(detail::read_text_file(dir / "status.json"));
            RunRecord run;
            run.loss = loss_name;
            run.seed = seed;
            run.trace = detail::trace_from_csv(detail::read_text_file(dir / "trace.csv"));
            if (status.at("status") == "failed") {
                run.failed = true;
                run.error = status.at("error");
            } else {
                const Checkpoint ckpt = load_checkpoint((dir / "checkpoint.txt").string());
                const ScoreMatrix scores =
                    predict_scores(ckpt.model, test_split.x, cfg.bounding);
                for (double t : cfg.thresholds)
                    run.by_threshold[t] = evaluate(test_split.y, scores.values, t);
                ++ok_runs;
            }
            report.runs.push_back(std::move(run));
        }
        if (ok_runs == 0)
            report.all_failed_losses.push_back(loss_name);
    }
    report.aggregates = aggregate_runs(report.runs, loss_order, cfg.thresholds);

    std::ostringstream runs_out;
    for (const auto& run : report.runs) {
        if (run.failed) {
            runs_out << failed_record_to_json(run).dump() << "\n";
        } else {
            for (double t : cfg.thresholds)
                runs_out << run_record_to_json(run, t).dump() << "\n";
        }
    }
    detail::write_text_file(out_dir / "runs.jsonl", runs_out.str());

    std::ostringstream agg_out;
    for (const auto& agg : report.aggregates)
        agg_out << aggregate_to_json(agg).dump() << "\n";
    detail::write_text_file(out_dir / "aggregates.jsonl", agg_out.str());
    return report;
}

/// Plain-text comparison table: one row per loss, one column per metric
/// (mean over seeds), best value per column marked with '*'. One block per
/// evaluation threshold.
inline std::string render_comparison_table(const RunReport& report,
                                           const std::vector<double>& thresholds) {
    static const std::vector<std::pair<std::string, std::string>> columns = {
        {"weighted_f1", "weightedF1"}, {"micro_f1", "microF1"}, {"macro_f1", "macroF1"},
        {"precision", "Precision"},    {"map", "mAP"},
    };
    std::ostringstream out;
    char buffer[40];
    for (double t : thresholds) {
        std::vector<const LossAggregate*> rows;
        for (const auto& agg : report.aggregates)
            if (agg.threshold == t)
                rows.push_back(&agg);
        if (rows.empty())
            continue;
        std::snprintf(buffer, sizeof(buffer), "%g", t);
        out << "@" << buffer << " (mean over seeds)\n";
        out << "loss            ";
        for (const auto& [key, label] : columns) {
            out << " " << label;
            for (std::size_t pad = label.size(); pad < 11; ++pad)
                out << " ";
        }
        out << "\n";
        std::map<std::string, double> best;
        for (const auto& [key, label] : columns) {
            best[key] = -1.0;
            for (const auto* row : rows)
                best[key] = std::max(best[key], row->per_metric.at(key).mean);
        }
        for (const auto* row : rows) {
            out << row->loss;
            for (std::size_t pad = row->loss.size(); pad < 16; ++pad)
                out << " ";
            for (const auto& [key, label] : columns) {
                const double value = row->per_metric.at(key).mean;
                std::snprintf(buffer, sizeof(buffer), "%.4f", value);
                out << " " << buffer << (value == best[key] ? "*" : " ");
                for (std::size_t pad = std::string(buffer).size() + 1; pad < 11; ++pad)
                    out << " ";
            }
            out << "\n";
        }
        out << "\n";
    }
    if (!report.all_failed_losses.empty()) {
        out << "excluded (all runs failed):";
        for (const auto& loss : report.all_failed_losses)
            out << " " << loss;
        out << "\n";
    }
    return out.str();
}

inline std::vector<double> report_thresholds(const RunReport& report) {
    std::vector<double> out;
    for (const auto& agg : report.aggregates)
        if (std::find(out.begin(), out.end(), agg.threshold) == out.end())
            out.push_back(agg.threshold);
    return out;
}

/// Full protocol: one shared dataset and split, training and evaluation for
/// every (loss, seed), robust per-loss statistics, rendered table. Reruns
/// with the same config produce byte-identical report files.
inline RunReport run_experiment(const ExperimentConfig& cfg) {
    require(!cfg.output_dir.empty(), "run_experiment: output.dir is not set");
    const fs::path out_dir(cfg.output_dir);
    persist_effective_config(cfg, out_dir);
    const Dataset dataset = load_experiment_dataset(cfg);
    const SplitDatasets splits = split(dataset, cfg.split_fractions, cfg.split_seed);
    detail::write_text_file(out_dir / "splits.txt", detail::splits_to_text(splits.indices));
    train_phase(cfg, splits.train, out_dir);
    RunReport report = eval_phase(cfg, splits.test, out_dir);
    detail::write_text_file(out_dir / "table.txt",
                            render_comparison_table(report, cfg.thresholds));
    return report;
}

/// Reads runs.jsonl and aggregates.jsonl back, recomputes the aggregates from
/// the per-seed records and verifies the stored ones match exactly.
inline RunReport load_report(const fs::path& out_dir) {
    const fs::path runs_path = out_dir / "runs.jsonl";
    if (!fs::exists(runs_path))
        throw std::runtime_error("no runs found in directory: " + out_dir.string());
    RunReport report;
    std::vector<std::string> loss_order;
    std::vector<double> thresholds;
    {
        std::istringstream in(detail::read_text_file(runs_path));
        std::string line;
        std::map<std::pair<std::string, Seed>, std::size_t> index;
        while (std::getline(in, line)) {
            if (detail::trim(line).empty())
                continue;
            const json record = json::parse(line);
            if (record.at("record") != "run")
                continue;
            const std::string loss = record.at("loss");
            const Seed seed = record.at("seed");
            if (std::find(loss_order.begin(), loss_order.end(), loss) == loss_order.end())
                loss_order.push_back(loss);
            const auto key = std::make_pair(loss, seed);
            if (index.find(key) == index.end()) {
                index[key] = report.runs.size();
                RunRecord run;
                run.loss = loss;
                run.seed = seed;
                report.runs.push_back(std::move(run));
            }
            RunRecord& run = report.runs[index[key]];
            if (record.at("status") == "failed") {
                run.failed = true;
                run.error = record.value("error", "");
                continue;
            }
            MetricReport metrics;
            metrics.threshold = record.at("threshold");
            metrics.weighted_f1 = record.at("weighted_f1");
            metrics.micro_f1 = record.at("micro_f1");
            metrics.macro_f1 = record.at("macro_f1");
            metrics.precision = record.at("precision");
            metrics.recall = record.at("recall");
            metrics.map = record.at("map");
            metrics.map_excluded_classes =
                static_cast<std::size_t>(record.at("map_excluded_classes").get<double>());
            run.by_threshold[metrics.threshold] = metrics;
            if (std::find(thresholds.begin(), thresholds.end(), metrics.threshold) ==
                thresholds.end())
                thresholds.push_back(metrics.threshold);
        }
    }
    for (const auto& loss : loss_order) {
        bool any_ok = false;
        for (const auto& run : report.runs)
            if (run.loss == loss && !run.failed)
                any_ok = true;
        if (!any_ok)
            report.all_failed_losses.push_back(loss);
    }
    report.aggregates = aggregate_runs(report.runs, loss_order, thresholds);

    const fs::path agg_path = out_dir / "aggregates.jsonl";
    if (fs::exists(agg_path)) {
        std::ostringstream recomputed;
        for (const auto& agg : report.aggregates)
            recomputed << aggregate_to_json(agg).dump() << "\n";
        if (recomputed.str() != detail::read_text_file(agg_path))
            throw std::runtime_error(
                "report integrity check failed: stored aggregates do not match the per-seed "
                "records in " +
                out_dir.string());
    }
    return report;
}

// ---------------------------------------------------------------------------
// (beta, eta) sensitivity grid.
// ---------------------------------------------------------------------------

struct SensitivityGrid {
    std::vector<double> betas;
    std::vector<double> etas;
    std::string metric;
    double threshold = 0.5;
    Matrix values;  // |betas| x |etas|; NaN marks a failed cell
    std::string config_hash;
    bool has_best = false;
    std::size_t best_beta_index = 0;
    std::size_t best_eta_index = 0;
};

/// One full training run per (beta, eta) cell at the first configured seed,
/// scored on the validation split. Best cell by the configured metric; ties
/// break toward smaller beta, then smaller eta. Failed cells are recorded as
/// NaN and excluded from the argmax.
inline SensitivityGrid grid_search(const ExperimentConfig& cfg) {
    require(!cfg.grid_betas.empty() && !cfg.grid_etas.empty(),
            "grid_search: beta and eta grids must be non-empty");
    SensitivityGrid grid;
    grid.betas = cfg.grid_betas;
    grid.etas = cfg.grid_etas;
    grid.metric = cfg.grid_metric;
    grid.threshold = cfg.grid_threshold;
    grid.config_hash = config_hash(cfg);
    grid.values = Matrix(grid.betas.size(), grid.etas.size(),
                         std::numeric_limits<double>::quiet_NaN());

    const Dataset dataset = load_experiment_dataset(cfg);
    const SplitDatasets splits = split(dataset, cfg.split_fractions, cfg.split_seed);
    const Seed seed = cfg.seeds.front();

    LossSpec base;
    base.kind = LossKind::sigmoid_f1;
    for (const auto& spec : cfg.losses)
        if (spec.kind == LossKind::sigmoid_f1)
            base = spec;

    TrainConfig train_cfg = cfg.train_config(base);
    if (cfg.grid_epochs > 0)
        train_cfg.epochs = cfg.grid_epochs;

    for (std::size_t bi = 0; bi < grid.betas.size(); ++bi) {
        for (std::size_t ei = 0; ei < grid.etas.size(); ++ei) {
            train_cfg.loss.params = SigmoidParams{grid.betas[bi], grid.etas[ei]};
            HeadModel model =
                init_head(splits.train.feature_dim(), cfg.hidden_dim, splits.train.n_classes(),
                          seed);
            try {
                const TrainResult result = train(std::move(model), splits.train, train_cfg, seed);
                const ScoreMatrix scores =
                    predict_scores(result.model, splits.val.x, cfg.bounding);
                const MetricReport report =
                    evaluate(splits.val.y, scores.values, cfg.grid_threshold);
                grid.values(bi, ei) = metric_by_name(report, cfg.grid_metric);
            } catch (const TrainingDiverged&) {
                // cell stays NaN
            }
        }
    }

    // Argmax over defined cells, scanning in ascending (beta, eta) value
    // order so ties resolve toward the smaller parameters.
    std::vector<std::size_t> beta_order(grid.betas.size()), eta_order(grid.etas.size());
    for (std::size_t i = 0; i < beta_order.size(); ++i)
        beta_order[i] = i;
    for (std::size_t i = 0; i < eta_order.size(); ++i)
        eta_order[i] = i;
    std::stable_sort(beta_order.begin(), beta_order.end(),
                     [&](std::size_t a, std::size_t b) { return grid.betas[a] < grid.betas[b]; });
    std::stable_sort(eta_order.begin(), eta_order.end(),
                     [&](std::size_t a, std::size_t b) { return grid.etas[a] < grid.etas[b]; });
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t bi : beta_order)
        for (std::size_t ei : eta_order) {
            const double v = grid.values(bi, ei);
            if (std::isnan(v))
                continue;
            if (v > best_value) {
                best_value = v;
                grid.has_best = true;
                grid.best_beta_index = bi;
                grid.best_eta_index = ei;
            }
        }
    return grid;
}

/// CSV matrix: beta rows, eta columns, axis values as headers.
inline std::string grid_to_csv(const SensitivityGrid& grid) {
    std::ostringstream out;
    char buffer[40];
    out << "beta\\eta";
    for (double eta : grid.etas) {
        std::snprintf(buffer, sizeof(buffer), "%g", eta);
        out << "," << buffer;
    }
    out << "\n";
    for (std::size_t bi = 0; bi < grid.betas.size(); ++bi) {
        std::snprintf(buffer, sizeof(buffer), "%g", grid.betas[bi]);
        out << buffer;
        for (std::size_t ei = 0; ei < grid.etas.size(); ++ei) {
            const double v = grid.values(bi, ei);
            if (std::isnan(v))
                out << ",nan";
            else {
                std::snprintf(buffer, sizeof(buffer), "%.17g", v);
                out << "," << buffer;
            }
        }
        out << "\n";
    }
    return out.str();
}

inline std::string grid_cells_jsonl(const SensitivityGrid& grid) {
    std::ostringstream out;
    for (std::size_t bi = 0; bi < grid.betas.size(); ++bi)
        for (std::size_t ei = 0; ei < grid.etas.size(); ++ei) {
            json record;
            record["record"] = "grid_cell";
            record["beta"] = grid.betas[bi];
            record["eta"] = grid.etas[ei];
            record["metric"] = grid.metric;
            record["threshold"] = grid.threshold;
            record["config_hash"] = grid.config_hash;
            const double v = grid.values(bi, ei);
            if (std::isnan(v))
                record["status"] = "failed";
            else {
                record["status"] = "ok";
                record["value"] = v;
            }
            out << record.dump() << "\n";
        }
    json best;
    best["record"] = "grid_best";
    best["config_hash"] = grid.config_hash;
    if (grid.has_best) {
        best["status"] = "ok";
        best["beta"] = grid.betas[grid.best_beta_index];
        best["eta"] = grid.etas[grid.best_eta_index];
        best["value"] = grid.values(grid.best_beta_index, grid.best_eta_index);
    } else {
        best["status"] = "failed";
    }
    out << best.dump() << "\n";
    return out.str();
}

}  // namespace smoothf1
