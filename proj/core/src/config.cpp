#include "odecf/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace odecf {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + v + "' as a number");
  }
}

template <typename T>
T parse_int(const std::string& v, const std::string& key) {
  T out{};
  const char* begin = v.data();
  const char* end = begin + v.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("key '" + key + "': cannot parse '" + v + "' as an integer");
  }
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': cannot parse '" + v + "' as a boolean");
}

std::vector<double> parse_weights(const std::string& v, const std::string& key) {
  std::vector<double> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_double(part, key));
  return out;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void RunConfig::set_key(const std::string& key, const std::string& value) {
  if (key == "train") train_path = value;
  else if (key == "test") test_path = value;
  else if (key == "cache") cache_path = value;
  else if (key == "out") out_dir = value;
  else if (key == "solver") solver = value;
  else if (key == "step") step = parse_double(value, key);
  else if (key == "rtol") rtol = parse_double(value, key);
  else if (key == "atol") atol = parse_double(value, key);
  else if (key == "residual") residual = parse_bool(value, key);
  else if (key == "corrector_iters") corrector_iters = parse_int<int>(value, key);
  else if (key == "corrector_tol") corrector_tol = parse_double(value, key);
  else if (key == "operator") operator_kind = value;
  else if (key == "dim") dim = parse_int<int>(value, key);
  else if (key == "k_time") k_time = parse_double(value, key);
  else if (key == "t_count") t_count = parse_int<int>(value, key);
  else if (key == "fixed_time") fixed_time = parse_bool(value, key);
  else if (key == "weights") weights = parse_weights(value, key);
  else if (key == "lr") lr = parse_double(value, key);
  else if (key == "lr_time") lr_time = parse_double(value, key);
  else if (key == "lambda") lambda = parse_double(value, key);
  else if (key == "batch") batch = parse_int<int>(value, key);
  else if (key == "epochs") epochs = parse_int<int>(value, key);
  else if (key == "seed") seed = parse_int<std::uint64_t>(value, key);
  else if (key == "topk") topk = parse_int<int>(value, key);
  else if (key == "eval_every") eval_every = parse_int<int>(value, key);
  else if (key == "patience") patience = parse_int<int>(value, key);
  else if (key == "time_margin") time_margin = parse_double(value, key);
  else if (key == "full_batch") full_batch = parse_bool(value, key);
  else if (key == "parallel") parallel = parse_bool(value, key);
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  RunConfig cfg;
  std::vector<std::string> problems;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back(path + ":" + std::to_string(line_no) + ": expected key=value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      cfg.set_key(key, value);
    } catch (const ConfigError& e) {
      problems.push_back(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string all = "config errors:";
    for (const auto& p : problems) all += "\n  " + p;
    throw ConfigError(all);
  }
  return cfg;
}

std::string RunConfig::serialize() const {
  std::ostringstream out;
  out << "train=" << train_path << "\n";
  out << "test=" << test_path << "\n";
  out << "cache=" << cache_path << "\n";
  out << "out=" << out_dir << "\n";
  out << "solver=" << solver << "\n";
  out << "step=" << fmt_double(step) << "\n";
  out << "rtol=" << fmt_double(rtol) << "\n";
  out << "atol=" << fmt_double(atol) << "\n";
  out << "residual=" << (residual ? "true" : "false") << "\n";
  out << "corrector_iters=" << corrector_iters << "\n";
  out << "corrector_tol=" << fmt_double(corrector_tol) << "\n";
  out << "operator=" << operator_kind << "\n";
  out << "dim=" << dim << "\n";
  out << "k_time=" << fmt_double(k_time) << "\n";
  out << "t_count=" << t_count << "\n";
  out << "fixed_time=" << (fixed_time ? "true" : "false") << "\n";
  out << "weights=";
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (i) out << ",";
    out << fmt_double(weights[i]);
  }
  out << "\n";
  out << "lr=" << fmt_double(lr) << "\n";
  out << "lr_time=" << fmt_double(lr_time) << "\n";
  out << "lambda=" << fmt_double(lambda) << "\n";
  out << "batch=" << batch << "\n";
  out << "epochs=" << epochs << "\n";
  out << "seed=" << seed << "\n";
  out << "topk=" << topk << "\n";
  out << "eval_every=" << eval_every << "\n";
  out << "patience=" << patience << "\n";
  out << "time_margin=" << fmt_double(time_margin) << "\n";
  out << "full_batch=" << (full_batch ? "true" : "false") << "\n";
  out << "parallel=" << (parallel ? "true" : "false") << "\n";
  return out.str();
}

std::vector<std::string> RunConfig::validation_errors() const {
  std::vector<std::string> errors;
  try {
    solver_kind_from_string(solver);
  } catch (const ConfigError& e) {
    errors.emplace_back(e.what());
  }
  if (step < 0.0) errors.push_back("step: must be positive (or 0 for the solver default)");
  if (!(rtol > 0.0)) errors.push_back("rtol: must be positive");
  if (!(atol > 0.0)) errors.push_back("atol: must be positive");
  if (corrector_iters < 1) errors.push_back("corrector_iters: must be >= 1");
  if (!(corrector_tol > 0.0)) errors.push_back("corrector_tol: must be positive");
  if (operator_kind != "adj" && operator_kind != "laplacian") {
    errors.push_back("operator: must be 'adj' or 'laplacian'");
  }
  if (dim < 1) errors.push_back("dim: must be >= 1");
  if (!(k_time > 0.0)) errors.push_back("k_time: must be positive");
  if (t_count < 0) errors.push_back("t_count: must be >= 0");
  if (!weights.empty() && static_cast<int>(weights.size()) != t_count + 2) {
    errors.push_back("weights: need t_count + 2 values");
  }
  if (lr < 0.0) errors.push_back("lr: must be nonnegative");
  if (lr_time < 0.0) errors.push_back("lr_time: must be nonnegative");
  if (lambda < 0.0) errors.push_back("lambda: must be nonnegative");
  if (batch < 1) errors.push_back("batch: must be >= 1");
  if (epochs < 1) errors.push_back("epochs: must be >= 1");
  if (topk < 1) errors.push_back("topk: must be >= 1");
  if (eval_every < 1) errors.push_back("eval_every: must be >= 1");
  if (patience < 1) errors.push_back("patience: must be >= 1");
  if (!(time_margin > 0.0) || time_margin >= k_time / (t_count + 1)) {
    errors.push_back("time_margin: must lie in (0, k_time/(t_count+1))");
  }
  return errors;
}

std::vector<std::string> RunConfig::validation_warnings() const {
  std::vector<std::string> warnings;
  const bool k_integer = k_time == std::floor(k_time);
  if (!k_integer || k_time < 2.0 || k_time > 4.0) {
    warnings.push_back("k_time outside the usual {2,3,4}");
  }
  if (t_count < 1 || t_count > 3) {
    warnings.push_back("t_count outside the usual {1,2,3}");
  }
  if (lr_time > lr) {
    warnings.push_back("lr_time exceeds lr; time points usually move far slower than embeddings");
  }
  return warnings;
}

SolverConfig RunConfig::solver_config() const {
  SolverConfig cfg = SolverConfig::for_kind(solver_kind_from_string(solver));
  if (step > 0.0) cfg.step = step;
  cfg.rtol = rtol;
  cfg.atol = atol;
  cfg.residual = residual;
  cfg.corrector_iters = corrector_iters;
  cfg.corrector_tol = corrector_tol;
  return cfg;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.lambda = lambda;
  cfg.lr_embed = lr;
  cfg.lr_time = lr_time;
  cfg.batch_size = batch;
  cfg.max_epochs = epochs;
  cfg.patience = patience;
  cfg.seed = seed;
  cfg.time_margin = time_margin;
  cfg.embed_dim = dim;
  cfg.eval_every = eval_every;
  cfg.topk = topk;
  cfg.full_batch = full_batch;
  return cfg;
}

TimeGrid RunConfig::time_grid() const {
  TimeGrid grid = TimeGrid::uniform(k_time, t_count);
  if (!weights.empty()) grid.weights = weights;
  grid.learnable = !fixed_time;
  return grid;
}

OperatorKind RunConfig::graph_operator() const {
  if (operator_kind == "adj") return OperatorKind::NormalizedAdjacency;
  if (operator_kind == "laplacian") return OperatorKind::NormalizedLaplacian;
  throw ConfigError("operator: must be 'adj' or 'laplacian'");
}

}  // namespace odecf
