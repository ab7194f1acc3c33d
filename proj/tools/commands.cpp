#include "commands.hpp"

#include "odecf/evaluation.hpp"
#include "odecf/io.hpp"
#include "odecf/training.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>

namespace odecf::cli {

namespace fs = std::filesystem;

void require_valid(const RunConfig& cfg) {
  const auto errors = cfg.validation_errors();
  if (errors.empty()) return;
  std::string all = "invalid configuration:";
  for (const auto& e : errors) all += "\n  " + e;
  throw ConfigError(all);
}

void warn_config(const RunConfig& cfg, std::ostream& log) {
  for (const auto& w : cfg.validation_warnings()) {
    log << "warning: " << w << "\n";
  }
}

namespace {

struct LoadedData {
  InteractionDataset ds;
  InteractionGraph graph;
};

LoadedData load_inputs(const RunConfig& cfg) {
  LoadedData data;
  if (!cfg.cache_path.empty() && fs::exists(cfg.cache_path)) {
    CsrMatrix cached = load_graph_cache(cfg.cache_path);
    const auto test_map = load_test_sidecar(test_sidecar_path(cfg.cache_path));
    data.ds = dataset_from_cache(cached, test_map, cfg.cache_path);
    data.graph = make_graph(std::move(cached), cfg.graph_operator());
    return data;
  }
  if (cfg.train_path.empty() || cfg.test_path.empty()) {
    throw ConfigError("no input data: set --cache to an existing cache, or --train and --test");
  }
  data.ds = load_dataset(cfg.train_path, cfg.test_path);
  data.graph = build_graph(data.ds, cfg.graph_operator());
  return data;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

nlohmann::json report_json(const EvalReport& report) {
  return nlohmann::json{
      {"recall_at_k", report.recall_at_k},
      {"ndcg_at_k", report.ndcg_at_k},
      {"k", report.k},
      {"users_evaluated", report.users_evaluated},
      {"wall_time_train_s", report.wall_time_train_s},
      {"wall_time_infer_s", report.wall_time_infer_s},
  };
}

struct AblateRun {
  std::string value;
  RunConfig cfg;
};

std::vector<AblateRun> ablate_runs(const RunConfig& base, const std::string& axis) {
  std::vector<AblateRun> runs;
  if (axis == "solver") {
    for (const char* name : {"euler", "rk4", "adams-moulton", "dopri"}) {
      RunConfig c = base;
      c.solver = name;
      c.step = 0.0;  // pick each solver's own default step
      runs.push_back({name, std::move(c)});
    }
  } else if (axis == "K") {
    for (double k : {2.0, 3.0, 4.0}) {
      RunConfig c = base;
      c.k_time = k;
      runs.push_back({std::to_string(static_cast<int>(k)), std::move(c)});
    }
  } else if (axis == "T") {
    for (int t : {1, 2, 3}) {
      RunConfig c = base;
      c.t_count = t;
      runs.push_back({std::to_string(t), std::move(c)});
    }
  } else if (axis == "fixed-vs-learnable") {
    RunConfig fixed = base;
    fixed.fixed_time = true;
    RunConfig learnable = base;
    learnable.fixed_time = false;
    runs.push_back({"fixed", std::move(fixed)});
    runs.push_back({"learnable", std::move(learnable)});
  } else {
    throw ConfigError("unknown ablation axis '" + axis +
                      "' (expected solver|K|T|fixed-vs-learnable)");
  }
  return runs;
}

}  // namespace

void cmd_prep(const RunConfig& cfg, std::ostream& log) {
  require_valid(cfg);
  if (cfg.train_path.empty() || cfg.test_path.empty() || cfg.cache_path.empty()) {
    throw ConfigError("prep needs --train, --test and --cache");
  }
  const InteractionDataset ds = load_dataset(cfg.train_path, cfg.test_path);
  const InteractionGraph graph = build_graph(ds, cfg.graph_operator());
  if (const auto dir = fs::path(cfg.cache_path).parent_path(); !dir.empty()) {
    fs::create_directories(dir);
  }
  save_graph_cache(cfg.cache_path, graph.adj_user_from_item);
  save_test_sidecar(test_sidecar_path(cfg.cache_path), ds.test_edges_by_user);
  write_file(cfg.cache_path + ".manifest", cfg.serialize());
  log << "cached graph: users=" << ds.num_users << " items=" << ds.num_items
      << " nnz=" << graph.adj_user_from_item.nnz() + graph.adj_item_from_user.nnz()
      << " (both directions)\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  require_valid(cfg);
  warn_config(cfg, log);
  if (cfg.out_dir.empty()) throw ConfigError("train needs --out");
  fs::create_directories(cfg.out_dir);
  write_file((fs::path(cfg.out_dir) / "manifest.cfg").string(), cfg.serialize());

  LoadedData data = load_inputs(cfg);
  const std::string checkpoint_path = (fs::path(cfg.out_dir) / "best.ltc").string();
  const auto on_eval = [&](int epoch, const EvalReport& report, const ModelParams& snapshot,
                           bool improved) {
    log << "epoch " << epoch << ": loss-eval recall@" << report.k << "=" << report.recall_at_k
        << " ndcg@" << report.k << "=" << report.ndcg_at_k << (improved ? " *" : "") << "\n";
    if (improved) save_checkpoint(checkpoint_path, snapshot);
  };

  const TrainResult result = train(data.ds, data.graph, cfg.train_config(), cfg.solver_config(),
                                   cfg.time_grid(), on_eval);
  write_file((fs::path(cfg.out_dir) / "curves.csv").string(), result.curves.to_csv());
  log << "finished after " << result.epochs_run << " epochs in " << result.wall_time_train_s
      << "s; best recall@" << result.best_eval.k << "=" << result.best_eval.recall_at_k << "\n";
}

void cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path, std::ostream& out,
              std::ostream& log) {
  require_valid(cfg);
  if (checkpoint_path.empty()) throw ConfigError("eval needs --checkpoint");
  if (cfg.cache_path.empty()) throw ConfigError("eval needs --cache");
  ModelParams params = load_checkpoint(checkpoint_path);
  CsrMatrix cached = load_graph_cache(cfg.cache_path);
  if (params.num_users() != static_cast<Index>(cached.rows) ||
      params.num_items() != static_cast<Index>(cached.cols)) {
    throw ConfigError("shape mismatch: checkpoint " + checkpoint_path + " holds " +
                      std::to_string(params.num_users()) + "x" +
                      std::to_string(params.num_items()) + " embeddings but cache " +
                      cfg.cache_path + " holds a " + std::to_string(cached.rows) + "x" +
                      std::to_string(cached.cols) + " graph");
  }
  const auto test_map = load_test_sidecar(test_sidecar_path(cfg.cache_path));
  const InteractionDataset ds = dataset_from_cache(cached, test_map, cfg.cache_path);
  const InteractionGraph graph = make_graph(std::move(cached), cfg.graph_operator());
  const EvalReport report = evaluate(params, graph, ds, cfg.solver_config(), cfg.topk);
  const std::string json = report_json(report).dump(2);
  out << json << "\n";
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    write_file((fs::path(cfg.out_dir) / "manifest.cfg").string(), cfg.serialize());
    write_file((fs::path(cfg.out_dir) / "eval.json").string(), json + "\n");
  }
  (void)log;
}

void cmd_ablate(const RunConfig& cfg, const std::string& axis, std::ostream& log) {
  require_valid(cfg);
  if (cfg.out_dir.empty()) throw ConfigError("ablate needs --out");
  fs::create_directories(cfg.out_dir);
  write_file((fs::path(cfg.out_dir) / "manifest.cfg").string(), cfg.serialize());
  const auto runs = ablate_runs(cfg, axis);

  // One row per run; a failing run records its error and the sweep goes on.
  auto one_row = [&axis](const AblateRun& run) -> std::string {
    try {
      require_valid(run.cfg);
      LoadedData data = load_inputs(run.cfg);
      const auto t0 = std::chrono::steady_clock::now();
      const TrainResult result = train(data.ds, data.graph, run.cfg.train_config(),
                                       run.cfg.solver_config(), run.cfg.time_grid());
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char row[256];
      std::snprintf(row, sizeof(row), "%s,%s,%.6f,%.6f,%.3f,ok\n", axis.c_str(),
                    run.value.c_str(), result.best_eval.recall_at_k, result.best_eval.ndcg_at_k,
                    wall);
      return row;
    } catch (const std::exception& e) {
      std::string msg = e.what();
      for (char& c : msg) {
        if (c == ',' || c == '\n') c = ';';
      }
      return axis + "," + run.value + ",,,,error: " + msg + "\n";
    }
  };

  std::string csv = "axis,value,recall,ndcg,wall_time_s,status\n";
  if (cfg.parallel) {
    std::vector<std::future<std::string>> rows;
    rows.reserve(runs.size());
    for (const AblateRun& run : runs) {
      rows.push_back(std::async(std::launch::async, one_row, std::cref(run)));
    }
    for (std::size_t i = 0; i < runs.size(); ++i) {
      log << "ablate " << axis << "=" << runs[i].value << "\n";
      csv += rows[i].get();
    }
  } else {
    for (const AblateRun& run : runs) {
      log << "ablate " << axis << "=" << run.value << "\n";
      csv += one_row(run);
    }
  }
  const std::string path = (fs::path(cfg.out_dir) / ("ablate_" + axis + ".csv")).string();
  write_file(path, csv);
  log << "wrote " << path << "\n";
}

}  // namespace odecf::cli
