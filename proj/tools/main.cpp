#include "commands.hpp"

#include "odecf/types.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

// Binds the shared flag surface to a RunConfig. Flags the user actually
// passed override values coming from --config.
struct FlagSet {
  odecf::RunConfig values;
  std::string config_path;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key=value config file; explicit flags override");
    app->add_option("--train", values.train_path, "training split (user item item ...)");
    app->add_option("--test", values.test_path, "test split");
    app->add_option("--cache", values.cache_path, "graph cache path (LTG1)");
    app->add_option("--out", values.out_dir, "output directory");
    app->add_option("--solver", values.solver, "euler|rk4|adams-moulton|dopri");
    app->add_option("--step", values.step, "fixed step size (0 = solver default)");
    app->add_option("--rtol", values.rtol, "dopri relative tolerance");
    app->add_option("--atol", values.atol, "dopri absolute tolerance");
    app->add_option("--residual", values.residual, "keep segment start states (true|false)");
    app->add_option("--operator", values.operator_kind, "adj|laplacian");
    app->add_option("--dim", values.dim, "embedding dimensionality");
    app->add_option("--k-time", values.k_time, "terminal time K");
    app->add_option("--t-count", values.t_count, "number of interior time points T");
    app->add_flag("--fixed-time", values.fixed_time, "freeze t_i at the uniform grid");
    app->add_option("--lr", values.lr, "embedding learning rate (Adam)");
    app->add_option("--lr-time", values.lr_time, "time-point learning rate");
    app->add_option("--lambda", values.lambda, "L2 regularization coefficient");
    app->add_option("--batch", values.batch, "BPR batch size");
    app->add_option("--epochs", values.epochs, "epoch budget");
    app->add_option("--seed", values.seed, "RNG seed");
    app->add_option("--topk", values.topk, "evaluation cutoff k");
    app->add_option("--eval-every", values.eval_every, "epochs between evaluations");
    app->add_option("--patience", values.patience, "evaluations without improvement before stopping");
    app->add_option("--time-margin", values.time_margin, "minimum gap between time points");
    app->add_flag("--full-batch", values.full_batch, "one fixed batch covering every training edge");
    app->add_flag("--parallel", values.parallel, "ablate: run the sweep's trainings concurrently");
  }

  odecf::RunConfig resolve(const CLI::App* app) const {
    odecf::RunConfig cfg;
    if (!config_path.empty()) cfg = odecf::RunConfig::from_file(config_path);
    auto passed = [app](const std::string& name) { return app->count(name) > 0; };
    if (passed("--train")) cfg.train_path = values.train_path;
    if (passed("--test")) cfg.test_path = values.test_path;
    if (passed("--cache")) cfg.cache_path = values.cache_path;
    if (passed("--out")) cfg.out_dir = values.out_dir;
    if (passed("--solver")) cfg.solver = values.solver;
    if (passed("--step")) cfg.step = values.step;
    if (passed("--rtol")) cfg.rtol = values.rtol;
    if (passed("--atol")) cfg.atol = values.atol;
    if (passed("--residual")) cfg.residual = values.residual;
    if (passed("--operator")) cfg.operator_kind = values.operator_kind;
    if (passed("--dim")) cfg.dim = values.dim;
    if (passed("--k-time")) cfg.k_time = values.k_time;
    if (passed("--t-count")) cfg.t_count = values.t_count;
    if (passed("--fixed-time")) cfg.fixed_time = values.fixed_time;
    if (passed("--lr")) cfg.lr = values.lr;
    if (passed("--lr-time")) cfg.lr_time = values.lr_time;
    if (passed("--lambda")) cfg.lambda = values.lambda;
    if (passed("--batch")) cfg.batch = values.batch;
    if (passed("--epochs")) cfg.epochs = values.epochs;
    if (passed("--seed")) cfg.seed = values.seed;
    if (passed("--topk")) cfg.topk = values.topk;
    if (passed("--eval-every")) cfg.eval_every = values.eval_every;
    if (passed("--patience")) cfg.patience = values.patience;
    if (passed("--time-margin")) cfg.time_margin = values.time_margin;
    if (passed("--full-batch")) cfg.full_batch = values.full_batch;
    if (passed("--parallel")) cfg.parallel = values.parallel;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ODE-based collaborative filtering: co-evolving user/item embeddings with a "
               "learnable-time layer combination"};
  app.require_subcommand(1);

  FlagSet prep_flags, train_flags, eval_flags, ablate_flags;
  std::string checkpoint_path;
  std::string axis;

  CLI::App* prep = app.add_subcommand("prep", "parse splits and write the graph cache");
  prep_flags.attach(prep);
  CLI::App* train = app.add_subcommand("train", "train and write checkpoint + curves");
  train_flags.attach(train);
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint, print a JSON report");
  eval_flags.attach(eval);
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint path (LTC1)")->required();
  CLI::App* ablate = app.add_subcommand("ablate", "sweep one configuration axis");
  ablate_flags.attach(ablate);
  ablate->add_option("--axis", axis, "solver|K|T|fixed-vs-learnable")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    if (prep->parsed()) {
      odecf::cli::cmd_prep(prep_flags.resolve(prep), std::cerr);
    } else if (train->parsed()) {
      odecf::cli::cmd_train(train_flags.resolve(train), std::cerr);
    } else if (eval->parsed()) {
      odecf::cli::cmd_eval(eval_flags.resolve(eval), checkpoint_path, std::cout, std::cerr);
    } else if (ablate->parsed()) {
      odecf::cli::cmd_ablate(ablate_flags.resolve(ablate), axis, std::cerr);
    }
  } catch (const odecf::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const odecf::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const odecf::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
