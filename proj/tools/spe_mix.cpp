#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spemix/report.hpp"

namespace {

using spemix::Dataset;
using spemix::Json;

// Bad flag combinations and unparseable flag values; exits with code 1 like
// the parser's own errors. Data problems exit 2, an all-failed sweep exits 3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<spemix::ModelSpec> parse_model_list(const std::string& text) {
  if (text == "all") return spemix::all_model_specs();
  std::vector<spemix::ModelSpec> specs;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const std::size_t begin = item.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    const std::size_t end = item.find_last_not_of(" \t");
    try {
      specs.push_back(
          spemix::parse_model_spec(item.substr(begin, end - begin + 1)));
    } catch (const spemix::ValidationError& err) {
      throw UsageError(err.what());
    }
  }
  if (specs.empty())
    throw UsageError("--models: expected 'all' or a comma-separated list");
  return specs;
}

void check_grid(int g_min, int g_max) {
  if (g_min < 1 || g_max < g_min)
    throw UsageError("--g-min/--g-max: need 1 <= g-min <= g-max");
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec)
    throw spemix::DataError("cannot create output directory '" + path +
                            "': " + ec.message());
}

struct FitArgs {
  std::string data;
  std::string label_col;
  bool scale = false;
  std::string models;
  int g_min = 1;
  int g_max = 1;
  std::uint64_t seed = 0;
  bool semi_supervised = false;
  double split_fraction = 0.25;
  std::uint64_t split_seed = 0;
  std::string out;
  int max_iter = 1000;
  double epsilon = 0.005;
};

int run_fit(const FitArgs& args) {
  const std::vector<spemix::ModelSpec> specs = parse_model_list(args.models);
  check_grid(args.g_min, args.g_max);
  if (args.max_iter < 1) throw UsageError("--max-iter must be >= 1");
  if (!(args.epsilon > 0.0)) throw UsageError("--epsilon must be > 0");
  if (args.semi_supervised) {
    if (args.label_col.empty())
      throw UsageError("--semi-supervised requires --label-col");
    if (!(args.split_fraction > 0.0) || args.split_fraction > 1.0)
      throw UsageError("--split-fraction must lie in (0, 1]");
  }

  Dataset ds = spemix::load_csv(args.data, true, args.label_col);
  if (args.scale) ds = spemix::standardize(ds);

  spemix::FitReportInputs inputs;
  std::vector<int> fit_labels;
  spemix::LabeledSplit split;
  if (args.semi_supervised) {
    split = spemix::make_split(ds, args.split_fraction, args.split_seed);
    fit_labels = spemix::masked_labels(ds, split);
    inputs.semi_supervised = true;
    inputs.labeled_rows = split.labeled_count();
    inputs.split_fraction = args.split_fraction;
    inputs.split_seed = args.split_seed;
  }

  spemix::FitOptions options;
  options.max_iterations = args.max_iter;
  options.epsilon = args.epsilon;
  spemix::SweepReport report = spemix::sweep(
      ds.x, specs, args.g_min, args.g_max, args.seed, options, fit_labels);

  inputs.dataset = &ds;
  inputs.report = &report;
  inputs.seed = args.seed;
  const spemix::SweepCell& best = report.best();
  if (ds.has_labels()) {
    inputs.has_truth = true;
    const std::vector<int> truth = ds.labels_zero_based();
    inputs.ari_all =
        spemix::adjusted_rand_index(best.result.hard_labels, truth);
    if (args.semi_supervised) {
      std::vector<int> pred_hidden, truth_hidden;
      for (int i = 0; i < ds.rows(); ++i)
        if (!split.mask[i]) {
          pred_hidden.push_back(best.result.hard_labels[i]);
          truth_hidden.push_back(truth[i]);
        }
      inputs.ari_unlabeled = pred_hidden.empty()
                                 ? 1.0
                                 : spemix::adjusted_rand_index(pred_hidden,
                                                               truth_hidden);
    }
  }

  ensure_directory(args.out);
  const std::filesystem::path out_dir(args.out);
  spemix::write_json_file((out_dir / "results.json").string(),
                          spemix::sweep_report_to_json(inputs));

  Json model_json = spemix::model_to_json(best.result.model);
  model_json["loglik"] = best.result.loglik;
  model_json["n"] = ds.rows();
  model_json["dataset"] = ds.name;
  spemix::write_json_file((out_dir / "best_model.json").string(), model_json);

  std::ostringstream assignments;
  assignments << "row,label\n";
  for (int i = 0; i < ds.rows(); ++i)
    assignments << (i + 1) << ',' << (best.result.hard_labels[i] + 1) << '\n';
  spemix::write_text_file((out_dir / "assignments.csv").string(),
                          assignments.str());

  const std::string summary = spemix::sweep_summary_text(inputs);
  spemix::write_text_file((out_dir / "summary.txt").string(), summary);
  std::cout << summary;
  std::cout << "wrote results.json, best_model.json, assignments.csv, "
               "summary.txt to "
            << args.out << "\n";
  return 0;
}

struct SimulateArgs {
  int design = 0;
  std::string config;
  std::uint64_t seed = 0;
  std::string sampler = "rejection";
  std::string out;
};

int run_simulate(const SimulateArgs& args) {
  if ((args.design == 0) == args.config.empty())
    throw UsageError("simulate: give exactly one of --design or --config");
  spemix::SamplerKind sampler;
  try {
    sampler = spemix::parse_sampler(args.sampler);
  } catch (const spemix::ValidationError& err) {
    throw UsageError(err.what());
  }
  spemix::SimulationConfig config;
  if (args.design != 0) {
    if (args.design < 1 || args.design > 3)
      throw UsageError("--design must be 1, 2, or 3");
    config = spemix::design_config(args.design);
  } else {
    config = spemix::simulation_config_from_json(
        spemix::load_json_file(args.config));
  }
  Dataset ds = spemix::simulate(config, args.seed, sampler);
  spemix::save_csv(args.out, ds);
  std::cout << "wrote " << ds.rows() << " rows (" << config.groups()
            << " groups, p=" << ds.cols() << ") to " << args.out << "\n";
  return 0;
}

// Accepts either a file with a column named "label" or any numeric CSV,
// whose last column is then used; values must be nonnegative integers.
std::vector<int> read_label_file(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe)
    throw spemix::DataError("cannot open '" + path + "'");
  std::string header;
  std::getline(probe, header);
  probe.close();
  if (header.find("label") != std::string::npos) {
    Dataset ds = spemix::load_csv(path, true, "label");
    return ds.labels;
  }
  Dataset ds = spemix::load_csv(path);
  std::vector<int> labels(ds.rows());
  const int last = ds.cols() - 1;
  for (int i = 0; i < ds.rows(); ++i) {
    const double value = ds.x(i, last);
    if (std::floor(value) != value || value < 0.0 || value > 1e6)
      throw spemix::DataError(
          "'" + path + "': row " + std::to_string(i + 2) +
          " does not hold a nonnegative integer label");
    labels[i] = static_cast<int>(value);
  }
  return labels;
}

struct EvaluateArgs {
  std::string pred;
  std::string truth;
};

int run_evaluate(const EvaluateArgs& args) {
  const std::vector<int> pred = read_label_file(args.pred);
  const std::vector<int> truth = read_label_file(args.truth);
  if (pred.size() != truth.size())
    throw spemix::DataError("evaluate: '" + args.pred + "' has " +
                            std::to_string(pred.size()) + " labels, '" +
                            args.truth + "' has " +
                            std::to_string(truth.size()));
  std::cout << spemix::format_double(spemix::adjusted_rand_index(pred, truth))
            << "\n";
  return 0;
}

struct ReplicateArgs {
  int design = 0;
  int replicates = 0;
  std::uint64_t seed = 0;
  std::string models;
  int g_min = 1;
  int g_max = 1;
  std::string out;
};

int run_replicate(const ReplicateArgs& args) {
  if (args.design < 1 || args.design > 3)
    throw UsageError("--design must be 1, 2, or 3");
  if (args.replicates < 1) throw UsageError("--replicates must be >= 1");
  const std::vector<spemix::ModelSpec> specs = parse_model_list(args.models);
  check_grid(args.g_min, args.g_max);

  const spemix::SimulationConfig config = spemix::design_config(args.design);
  const std::vector<spemix::ReplicateOutcome> outcomes =
      spemix::replicate_study(config, args.replicates, args.seed, specs,
                              args.g_min, args.g_max);
  const spemix::ReplicateSummary summary =
      spemix::summarize_replicates(outcomes);
  if (summary.n_with_best == 0)
    throw spemix::NoConvergedFitError(
        "replicate: no replicate produced a converged fit");

  ensure_directory(args.out);
  const std::filesystem::path out_dir(args.out);
  spemix::write_json_file(
      (out_dir / "replicates.json").string(),
      spemix::replicates_to_json(config.name, args.seed, outcomes, summary));
  const std::string text =
      spemix::replicate_summary_text(config.name, args.seed, summary);
  spemix::write_text_file((out_dir / "summary.txt").string(), text);
  std::cout << text;
  std::cout << "wrote replicates.json, summary.txt to " << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "spe-mix: clustering and semi-supervised classification with "
      "mixtures of multivariate skewed power exponential distributions"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "sweep mixture models over a dataset and keep the best by BIC");
  fit_cmd->add_option("--data", fit_args.data, "input CSV with a header row")
      ->required();
  fit_cmd->add_option("--label-col", fit_args.label_col,
                      "name of the truth label column (1-based classes)");
  fit_cmd->add_flag("--scale", fit_args.scale,
                    "standardize columns before fitting");
  fit_cmd->add_option("--models", fit_args.models,
                      "'all' or comma-separated model names, e.g. EIIV,VVVE")
      ->required();
  fit_cmd->add_option("--g-min", fit_args.g_min, "smallest number of groups")
      ->required();
  fit_cmd->add_option("--g-max", fit_args.g_max, "largest number of groups")
      ->required();
  fit_cmd->add_option("--seed", fit_args.seed, "base seed for the sweep")
      ->required();
  fit_cmd->add_flag("--semi-supervised", fit_args.semi_supervised,
                    "reveal a stratified fraction of the labels to the fit");
  fit_cmd->add_option("--split-fraction", fit_args.split_fraction,
                      "supervised fraction (default 0.25)");
  fit_cmd->add_option("--split-seed", fit_args.split_seed,
                      "seed of the supervision split (default 0)");
  fit_cmd->add_option("--out", fit_args.out, "output directory")->required();
  fit_cmd->add_option("--max-iter", fit_args.max_iter,
                      "iteration cap per fit (default 1000)");
  fit_cmd->add_option("--epsilon", fit_args.epsilon,
                      "Aitken stopping tolerance (default 0.005)");

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand(
      "simulate", "draw one dataset from a bundled design or a config file");
  sim_cmd->add_option("--design", sim_args.design,
                      "bundled simulation design (1, 2, or 3)");
  sim_cmd->add_option("--config", sim_args.config,
                      "json mixture description (see configs/)");
  sim_cmd->add_option("--seed", sim_args.seed, "simulation seed")->required();
  sim_cmd->add_option("--sampler", sim_args.sampler,
                      "rejection (default) or mh");
  sim_cmd->add_option("--out", sim_args.out, "output CSV path")->required();

  EvaluateArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand(
      "evaluate", "print the adjusted Rand index of two labelings");
  eval_cmd->add_option("--pred", eval_args.pred, "predicted labels CSV")
      ->required();
  eval_cmd->add_option("--truth", eval_args.truth, "truth labels CSV")
      ->required();

  ReplicateArgs rep_args;
  CLI::App* rep_cmd = app.add_subcommand(
      "replicate", "repeated simulate-then-sweep study with frequency tables");
  rep_cmd->add_option("--design", rep_args.design,
                      "bundled simulation design (1, 2, or 3)")
      ->required();
  rep_cmd->add_option("--replicates", rep_args.replicates,
                      "number of replicates")
      ->required();
  rep_cmd->add_option("--seed", rep_args.seed, "base seed")->required();
  rep_cmd->add_option("--models", rep_args.models,
                      "'all' or comma-separated model names")
      ->required();
  rep_cmd->add_option("--g-min", rep_args.g_min, "smallest number of groups")
      ->required();
  rep_cmd->add_option("--g-max", rep_args.g_max, "largest number of groups")
      ->required();
  rep_cmd->add_option("--out", rep_args.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (eval_cmd->parsed()) return run_evaluate(eval_args);
    if (rep_cmd->parsed()) return run_replicate(rep_args);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 1;
  } catch (const spemix::NoConvergedFitError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const spemix::DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return 2;
  } catch (const spemix::ValidationError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return 2;
  } catch (const spemix::NumericalError& err) {
    std::cerr << "numerical error: " << err.what() << "\n";
    return 2;
  }
  return 1;
}
