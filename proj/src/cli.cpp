#include "disrep/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "disrep/config.hpp"
#include "disrep/eval.hpp"
#include "disrep/trainer.hpp"

namespace disrep {

namespace {

struct UsageError : ArgumentError {
  using ArgumentError::ArgumentError;
};

struct Options {
  std::string command;
  std::string config;
  std::string checkpoint;
  std::string output_dir;
  std::string data_dir;
  std::string dataset;
  std::string oracle;
  std::string input;
  std::string classes = "all";
  std::string mode = "class-sweep";
  std::optional<uint64_t> seed;
  std::optional<int> labeled_count;
  std::optional<int64_t> iters;
  std::vector<std::string> overrides;
  int per_class = 500;
  int target_class = -1;
  int cont_dim = 0;
  int steps = 7;
  int count = 8;
  int columns = 8;
};

std::vector<std::pair<std::string, std::string>> cli_overrides(const Options& o) {
  std::vector<std::pair<std::string, std::string>> kv;
  if (!o.dataset.empty()) kv.emplace_back("dataset", o.dataset);
  if (o.seed) kv.emplace_back("seed", std::to_string(*o.seed));
  if (o.labeled_count) kv.emplace_back("labeled_count", std::to_string(*o.labeled_count));
  if (o.iters && o.command != "oracle-train") kv.emplace_back("iters", std::to_string(*o.iters));
  if (!o.data_dir.empty()) kv.emplace_back("data_dir", o.data_dir);
  for (const auto& s : o.overrides) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return kv;
}

void apply_overrides(RunConfig& c, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) c.set(k, v);
}

RunConfig resolve_config(const Options& o) {
  if (o.config.empty()) throw UsageError(o.command + ": --config is required");
  RunConfig c = load_config(o.config);
  apply_overrides(c, cli_overrides(o));
  c.validate();
  return c;
}

std::filesystem::path output_dir(const Options& o, const RunConfig& c) {
  if (!o.output_dir.empty()) return o.output_dir;
  return std::filesystem::path("runs") / (c.dataset + "-seed" + std::to_string(c.seed));
}

void write_manifest(const std::filesystem::path& dir, const Options& o, const std::vector<std::string>& args,
                    const RunConfig& c) {
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / ("manifest_" + o.command + ".txt"));
  f << "command: " << o.command << "\n"
    << "code_version: " << kCodeVersion << "\n"
    << "format_version: " << Container::kFormatVersion << "\n"
    << "seed: " << (o.seed ? *o.seed : c.seed) << "\n";
  std::string joined;
  for (const auto& a : args) joined += (joined.empty() ? "" : " ") + a;
  f << "argv: " << joined << "\n";
  if (!o.checkpoint.empty()) f << "checkpoint: " << o.checkpoint << "\n";
  for (const auto& [k, v] : cli_overrides(o)) f << "override." << k << ": " << v << "\n";
  for (const auto& [k, v] : c.entries()) f << "config." << k << ": " << v << "\n";
  if (!f) throw std::runtime_error("cannot write run manifest in " + dir.string());
}

LoadedCheckpoint require_checkpoint(const Options& o) {
  if (o.checkpoint.empty()) throw UsageError(o.command + ": --checkpoint is required");
  return load_checkpoint(o.checkpoint);
}

/// Images for translate/interpolate: --input IDX file, else the configured test split.
Mat<Real> input_images(const Options& o, const RunConfig& c, Eigen::Index n) {
  Dataset ds;
  if (!o.input.empty()) {
    ds = load_idx_images(o.input);
  } else {
    RunConfig dc = c;
    if (!o.data_dir.empty()) dc.data_dir = o.data_dir;
    ds = load_datasets(dc).test;
  }
  if (!(ds.shape == image_shape_for(c))) throw ArgumentError("input images do not match the model's image shape");
  if (ds.size() < n)
    throw ArgumentError("need " + std::to_string(n) + " input images, found " + std::to_string(ds.size()));
  return ds.images.leftCols(n);
}

std::vector<int> parse_classes(const Options& o) {
  if (o.target_class >= 0) return {o.target_class};
  if (o.classes == "all") return {};
  std::vector<int> out;
  std::stringstream ss(o.classes);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw UsageError("--classes expects 'all' or a comma-separated list, got '" + o.classes + "'");
    }
  }
  return out;
}

int cmd_train(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  RunConfig config;
  TrainState state;
  const bool resume = !o.checkpoint.empty();
  if (resume) {
    RunConfig stored = load_checkpoint(o.checkpoint).config;
    config = o.config.empty() ? stored : load_config(o.config);
    apply_overrides(config, cli_overrides(o));
    config.validate();
    state = load_checkpoint(o.checkpoint, &config).state;
  } else {
    config = resolve_config(o);
    state = init_state(config, image_shape_for(config));
  }
  const auto dir = output_dir(o, config);
  write_manifest(dir, o, args, config);
  const DataSplits data = load_datasets(config);
  TrainOptions topt;
  topt.output_dir = dir;
  topt.append_log = resume;
  const auto rows = train(state, data, config, topt);
  out << "iterations: " << state.iteration << "\n";
  if (!rows.empty()) out << log_header() << "\n" << log_line(rows.back()) << "\n";
  out << "checkpoint: " << checkpoint_path(dir, state.iteration).string() << "\n";
  return exit_ok;
}

int cmd_grid(const Options& o, const std::vector<std::string>& args, std::ostream& out, GridMode mode) {
  LoadedCheckpoint ck = require_checkpoint(o);
  const uint64_t seed = o.seed ? *o.seed : ck.config.seed;
  auto& model = ck.state.model;
  GridParams p;
  p.columns = o.columns;
  p.steps = o.steps;
  p.cont_index = o.cont_dim;
  p.classes = parse_classes(o);
  if (mode == GridMode::translate) p.inputs = input_images(o, ck.config, o.count);
  if (mode == GridMode::interpolate) p.inputs = input_images(o, ck.config, 2 * Eigen::Index(o.count));
  Rng rng(seed);
  const Grid grid = grid_generate(model.generator, model.spec, &model.encoder, mode, p, rng);
  const auto dir = output_dir(o, ck.config);
  write_manifest(dir, o, args, ck.config);
  const auto path = dir / grid_filename(mode, ck.state.iteration, seed);
  write_png(render(grid), path);
  out << "grid: " << path.string() << " (" << grid.rows << "x" << grid.cols << ")\n";
  return exit_ok;
}

int cmd_evaluate(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  LoadedCheckpoint ck = require_checkpoint(o);
  if (o.oracle.empty()) throw UsageError("evaluate: --oracle is required");
  OracleClassifier oracle = load_oracle(o.oracle);
  const uint64_t seed = o.seed ? *o.seed : ck.config.seed;
  RunConfig dc = ck.config;
  if (!o.data_dir.empty()) dc.data_dir = o.data_dir;
  const DataSplits data = load_datasets(dc);
  Rng rng(seed);
  EvalReport report = generator_error(ck.state.model, oracle, o.per_class, rng);
  report.iteration = ck.state.iteration;
  report.seed = seed;
  report.encoder_accuracy = 100.0 * encoder_accuracy(ck.state.model, data.test);
  report.encoder_samples = data.test.size();
  const auto dir = output_dir(o, ck.config);
  write_manifest(dir, o, args, ck.config);
  std::ofstream(dir / "eval_report.txt") << report.to_text();
  std::ofstream(dir / "eval_classes.csv") << report.to_csv();
  out << report.to_text();
  return exit_ok;
}

int cmd_oracle_train(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const RunConfig config = resolve_config(o);
  const DataSplits data = load_datasets(config);
  OracleOptions opt;
  opt.family = config.family;
  opt.width_divisor = config.width_divisor;
  opt.seed = config.seed;
  if (o.iters) opt.iters = *o.iters;
  opt.accuracy_floor = config.preset() == DatasetPreset::mnist ? 0.99 : config.preset() == DatasetPreset::shapes ? 0.98 : 0.9;
  OracleClassifier oracle = train_oracle(data.train, data.test, opt);
  const auto dir = output_dir(o, config);
  write_manifest(dir, o, args, config);
  const auto path = dir / "oracle.ckpt";
  save_oracle(oracle, path);
  out << "oracle: " << path.string() << "\n"
      << "test_accuracy: " << format_double(oracle.test_accuracy) << "\n";
  if (!oracle.warning.empty()) out << "warning: " << oracle.warning << "\n";
  return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Semi-supervised disentangled representation learning", "disrep"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "Flat key = value config file");
    s->add_option("--seed", o.seed, "Seed for all randomness");
    s->add_option("--dataset", o.dataset, "mnist, svhn, celeba or shapes");
    s->add_option("--data-dir", o.data_dir, "Dataset directory");
    s->add_option("--output-dir", o.output_dir, "Directory for artifacts");
    s->add_option("--set", o.overrides, "Config override key=value (repeatable)");
  };
  auto grid_opts = [&](CLI::App* s) {
    s->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
    s->add_option("--steps", o.steps, "Columns of a sweep or interpolation");
  };

  auto* train = app.add_subcommand("train", "Train G, E and D");
  common(train);
  train->add_option("--labeled-count", o.labeled_count, "Number of labeled training samples");
  train->add_option("--iters", o.iters, "Training iterations");
  train->add_option("--checkpoint", o.checkpoint, "Resume from this checkpoint");

  auto* generate = app.add_subcommand("generate", "Class or continuous sweep grid");
  common(generate);
  grid_opts(generate);
  generate->add_option("--mode", o.mode, "class-sweep or continuous-sweep");
  generate->add_option("--cont-dim", o.cont_dim, "Continuous dimension varied by continuous-sweep");
  generate->add_option("--columns", o.columns, "Fixed codes per class-sweep row");

  auto* translate = app.add_subcommand("translate", "Re-render inputs with other classes");
  common(translate);
  grid_opts(translate);
  translate->add_option("--input", o.input, "IDX images file (default: test split)");
  translate->add_option("--classes", o.classes, "'all' or comma-separated classes");
  translate->add_option("--target-class", o.target_class, "Single target class");
  translate->add_option("--count", o.count, "Number of input images");

  auto* interpolate = app.add_subcommand("interpolate", "Interpolate between encoded pairs");
  common(interpolate);
  grid_opts(interpolate);
  interpolate->add_option("--input", o.input, "IDX images file (default: test split)");
  interpolate->add_option("--count", o.count, "Number of pairs");

  auto* evaluate = app.add_subcommand("evaluate", "Generator error and encoder accuracy");
  common(evaluate);
  evaluate->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  evaluate->add_option("--oracle", o.oracle, "Oracle classifier file");
  evaluate->add_option("--per-class", o.per_class, "Generated samples per class");

  auto* oracle = app.add_subcommand("oracle-train", "Train the oracle classifier");
  common(oracle);
  oracle->add_option("--iters", o.iters, "Classifier training iterations");

  std::vector<std::string> argv_store{"disrep"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_validation;
  }

  try {
    if (train->parsed()) {
      o.command = "train";
      return cmd_train(o, args, out);
    }
    if (generate->parsed()) {
      o.command = "generate";
      const GridMode mode = parse_grid_mode(o.mode);
      if (mode != GridMode::class_sweep && mode != GridMode::continuous_sweep)
        throw UsageError("generate: --mode must be class-sweep or continuous-sweep");
      return cmd_grid(o, args, out, mode);
    }
    if (translate->parsed()) {
      o.command = "translate";
      return cmd_grid(o, args, out, GridMode::translate);
    }
    if (interpolate->parsed()) {
      o.command = "interpolate";
      return cmd_grid(o, args, out, GridMode::interpolate);
    }
    if (evaluate->parsed()) {
      o.command = "evaluate";
      return cmd_evaluate(o, args, out);
    }
    o.command = "oracle-train";
    return cmd_oracle_train(o, args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return exit_validation;
  } catch (const NumericFault& e) {
    err << "runtime fault: " << e.what() << "\n";
    return exit_runtime;
  } catch (const ArgumentError& e) {
    err << "validation error: " << e.what() << "\n";
    return exit_validation;
  } catch (const ConfigError& e) {
    err << "validation error: " << e.what() << "\n";
    return exit_validation;
  } catch (const LoadError& e) {
    err << "validation error: " << e.what() << "\n";
    return exit_validation;
  } catch (const FormatError& e) {
    err << "validation error: " << e.what() << "\n";
    return exit_validation;
  } catch (const SelectionError& e) {
    err << "validation error: " << e.what() << "\n";
    return exit_validation;
  } catch (const std::exception& e) {
    err << "runtime fault: " << e.what() << "\n";
    return exit_runtime;
  }
}

}  // namespace disrep
