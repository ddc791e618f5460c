#include "disrep/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace disrep {

namespace {

enum class Stream : uint64_t { init = 1, train = 2, shapes_train = 3, shapes_test = 4, labeled = 5 };

Rng stream_rng(uint64_t seed, Stream stream) {
  std::seed_seq seq{uint32_t(seed), uint32_t(seed >> 32), uint32_t(stream)};
  return Rng(seq);
}

std::string one_line(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '\n') {
      if (!out.empty() && out.back() != '|') out += " |";
    } else {
      out += c;
    }
  }
  while (!out.empty() && (out.back() == '|' || out.back() == ' ')) out.pop_back();
  return out;
}

std::string shape_text(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

Shape parse_shape(const std::string& text) {
  Shape s;
  char x1 = 0;
  char x2 = 0;
  std::istringstream in(text);
  if (!(in >> s.height >> x1 >> s.width >> x2 >> s.channels) || x1 != 'x' || x2 != 'x')
    throw LoadError("checkpoint: bad image shape '" + text + "'");
  return s;
}

void quantize_8bit(Dataset& ds) {
  ds.images = (ds.images * 255.0f).array().round().matrix() / 255.0f;
}

void put_network(Container& c, const std::string& prefix, Network<Real>& net) {
  for (auto& [name, p] : net.named_params()) c.put(prefix + "." + name, p->value);
  for (auto& [name, p] : net.named_buffers()) c.put(prefix + "." + name, p->value);
}

void take_network(const Container& c, const std::string& prefix, Network<Real>& net) {
  for (auto& [name, p] : net.named_params()) c.take(prefix + "." + name, p->value);
  for (auto& [name, p] : net.named_buffers()) c.take(prefix + "." + name, p->value);
}

void put_adam(Container& c, const std::string& prefix, const Adam<Real>& adam) {
  for (size_t i = 0; i < adam.moments.size(); ++i) {
    c.put(prefix + "." + std::to_string(i) + ".m", adam.moments[i].m);
    c.put(prefix + "." + std::to_string(i) + ".v", adam.moments[i].v);
  }
}

void take_adam(const Container& c, const std::string& prefix, Adam<Real>& adam, Network<Real>& net) {
  adam.step_count = std::stoll(c.get(prefix + ".step"));
  adam.moments.clear();
  if (adam.step_count == 0) return;
  const auto params = net.params();
  adam.moments.resize(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    adam.moments[i].m.resize(params[i]->value.rows(), params[i]->value.cols());
    adam.moments[i].v.resize(params[i]->value.rows(), params[i]->value.cols());
    c.take(prefix + "." + std::to_string(i) + ".m", adam.moments[i].m);
    c.take(prefix + "." + std::to_string(i) + ".v", adam.moments[i].v);
  }
}

Adam<Real> make_adam(const OptimizerSpec& o, double lr) { return {lr, o.beta1, o.beta2, o.eps, 0, {}}; }

}  // namespace

std::string architecture_text(const Model<Real>& model) {
  return describe(model.generator.config) + describe(model.encoder.config) + describe(model.discriminator.config);
}

TrainState init_state(const RunConfig& config, Shape image) {
  config.validate();
  TrainState state;
  Rng init = stream_rng(config.seed, Stream::init);
  state.model = Model<Real>(config.latent, family_for(config, image), init);
  state.adam_d = make_adam(config.optimizer, config.optimizer.lr_d);
  state.adam_g = make_adam(config.optimizer, config.optimizer.lr_ge);
  state.adam_e = make_adam(config.optimizer, config.optimizer.lr_ge);
  state.rng = stream_rng(config.seed, Stream::train);
  state.fingerprint = fingerprint(to_string(config.latent) + "\n" + architecture_text(state.model));
  return state;
}

LossReport train_step(TrainState& state, const LabeledBatch& batch, const RunConfig& config) {
  if (batch.size() == 0) throw ArgumentError("train_step: empty batch");
  auto& model = state.model;
  if (batch.images.rows() != model.image_shape().size())
    throw ArgumentError("train_step: batch images do not match the generator output shape");

  const StepWeights w = weights_at(config.weights, state.iteration, config.ramp_iters);
  const Mat<Real> codes = sample_code_batch<Real>(model.spec, static_cast<int>(batch.size()), state.rng);

  const AdversarialLosses adv = discriminator_pass(model, batch.images, codes, w, state.rng);
  state.adam_d.step(model.discriminator.params());

  LossReport report = generator_encoder_pass(model, batch.images, batch.labels, batch.mask, codes, w, state.rng);
  report.adv_d = adv.d;
  std::tie(report.total_ge, report.total_d) = composite(report, w.as_loss_weights());
  if (!report.all_finite()) {
    std::ostringstream os;
    os << "iteration " << state.iteration << ": non-finite loss (" << log_line({state.iteration, report}) << ")";
    throw NumericFault(os.str());
  }
  state.adam_g.step(model.generator.params());
  state.adam_e.step(model.encoder.params());
  ++state.iteration;
  return report;
}

DataSplits load_datasets(const RunConfig& config) {
  config.validate();
  DataSplits out;
  const std::filesystem::path dir = config.data_dir;
  switch (config.preset()) {
    case DatasetPreset::shapes: {
      Rng train_rng = stream_rng(config.seed, Stream::shapes_train);
      Rng test_rng = stream_rng(config.seed, Stream::shapes_test);
      out.train = make_shapes(config.shapes_train, config.image_size, train_rng);
      out.test = make_shapes(config.shapes_test, config.image_size, test_rng);
      quantize_8bit(out.train);
      quantize_8bit(out.test);
      if (!config.data_dir.empty()) {
        const std::string stem = "shapes" + std::to_string(config.image_size) + "-s" + std::to_string(config.seed);
        if (!std::filesystem::exists(dir / (stem + "-train-images.idx"))) {
          save_idx(out.train, dir / (stem + "-train-images.idx"), dir / (stem + "-train-labels.idx"));
          save_idx(out.test, dir / (stem + "-test-images.idx"), dir / (stem + "-test-labels.idx"));
        }
      }
      break;
    }
    case DatasetPreset::mnist:
      out.train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
      out.test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
      break;
    case DatasetPreset::svhn:
      out.train = load_idx(dir / "svhn-train-images.idx", dir / "svhn-train-labels.idx");
      out.test = load_idx(dir / "svhn-test-images.idx", dir / "svhn-test-labels.idx");
      break;
    case DatasetPreset::celeba:
      throw ConfigError("celeba ingestion is not supported; only the network configuration is available");
  }
  out.test.split = "test";
  const Shape expected = image_shape_for(config);
  if (!(out.train.shape == expected) || !(out.test.shape == expected))
    throw ConfigError("dataset image shape " + shape_text(out.train.shape) + " does not match configured " +
                      shape_text(expected));
  Rng labeled_rng = stream_rng(config.seed, Stream::labeled);
  out.labeled = select_labeled(out.train, config.labeled_count, labeled_rng);
  return out;
}

std::string log_header() { return "iter,rec,info_cat,info_cont,sup,adv_d,adv_g,adv_e"; }

std::string log_line(const LogRow& row) {
  const auto& r = row.report;
  std::string s = std::to_string(row.iter);
  for (double v : {r.rec, r.info_cat, r.info_cont, r.sup, r.adv_d, r.adv_g, r.adv_e}) s += "," + format_double(v);
  return s;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int64_t iteration) {
  std::ostringstream name;
  name << "ckpt_" << std::setw(8) << std::setfill('0') << iteration << ".ckpt";
  return dir / name.str();
}

std::vector<LogRow> train(TrainState& state, const DataSplits& data, const RunConfig& config,
                          const TrainOptions& options) {
  config.validate();
  std::vector<LogRow> rows;
  const bool to_disk = !options.output_dir.empty();
  std::ofstream log;
  if (to_disk) {
    std::filesystem::create_directories(options.output_dir);
    const auto log_path = options.output_dir / "loss.csv";
    const bool fresh = !options.append_log || !std::filesystem::exists(log_path);
    log.open(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("cannot open " + log_path.string());
    if (fresh) log << log_header() << "\n";
  }

  auto checkpoint = [&] {
    const auto path = checkpoint_path(options.output_dir, state.iteration);
    try {
      save_checkpoint(state, config, path);
    } catch (const std::exception&) {
      try {
        save_checkpoint(state, config, options.output_dir / "final_attempt.ckpt");
      } catch (...) {
      }
      throw;
    }
  };

  const double ratio = double(config.labeled_count) / double(data.train.size());
  int64_t last_saved = -1;
  while (state.iteration < config.iters) {
    const double p = labeled_prob_at(state.iteration, ratio, config.ramp_iters);
    const LabeledBatch batch = draw_batch(data.train, data.labeled, p, config.optimizer.batch_size, state.rng);
    LossReport report;
    try {
      report = train_step(state, batch, config);
    } catch (const NumericFault&) {
      if (to_disk) {
        try {
          save_checkpoint(state, config, options.output_dir / "fault_snapshot.ckpt");
        } catch (...) {
        }
      }
      throw;
    }
    LogRow row{state.iteration, report};
    if (to_disk) log << log_line(row) << "\n" << std::flush;
    if (options.on_row) options.on_row(row);
    rows.push_back(row);
    if (to_disk && config.checkpoint_every > 0 && state.iteration % config.checkpoint_every == 0) {
      checkpoint();
      last_saved = state.iteration;
    }
  }
  if (to_disk && last_saved != state.iteration) checkpoint();
  return rows;
}

// ---------------------------------------------------------------------------

Container checkpoint_container(TrainState& state, const RunConfig& config) {
  Container c;
  auto& m = state.model;
  std::ostringstream rng;
  rng << state.rng;
  c.manifest = {
      {"format_version", std::to_string(Container::kFormatVersion)},
      {"kind", "model"},
      {"iteration", std::to_string(state.iteration)},
      {"seed", std::to_string(config.seed)},
      {"latent", to_string(m.spec)},
      {"image_shape", shape_text(m.image_shape())},
      {"fingerprint", state.fingerprint},
      {"architecture.generator", one_line(describe(m.generator.config))},
      {"architecture.encoder", one_line(describe(m.encoder.config))},
      {"architecture.discriminator", one_line(describe(m.discriminator.config))},
      {"adam.D.step", std::to_string(state.adam_d.step_count)},
      {"adam.G.step", std::to_string(state.adam_g.step_count)},
      {"adam.E.step", std::to_string(state.adam_e.step_count)},
      {"rng", rng.str()},
  };
  for (const auto& [k, v] : config.entries()) c.manifest.emplace_back("config." + k, v);
  put_network(c, "G", m.generator);
  put_network(c, "E", m.encoder);
  put_network(c, "D", m.discriminator);
  put_adam(c, "adam.D", state.adam_d);
  put_adam(c, "adam.G", state.adam_g);
  put_adam(c, "adam.E", state.adam_e);
  return c;
}

void save_checkpoint(TrainState& state, const RunConfig& config, const std::filesystem::path& path) {
  save_container(checkpoint_container(state, config), path);
}

LoadedCheckpoint checkpoint_from_container(const Container& c, const RunConfig* expected) {
  if (c.get("kind") != "model") throw LoadError("checkpoint: not a model checkpoint");
  if (c.get("format_version") != std::to_string(Container::kFormatVersion))
    throw LoadError("checkpoint: unsupported format version " + c.get("format_version"));
  LoadedCheckpoint out;
  for (const auto& [k, v] : c.manifest) {
    if (k.rfind("config.", 0) != 0) continue;
    try {
      out.config.set(k.substr(7), v);
    } catch (const std::exception& e) {
      throw LoadError(std::string("checkpoint: ") + e.what());
    }
  }
  const Shape image = parse_shape(c.get("image_shape"));
  out.state = init_state(out.config, image);
  auto& m = out.state.model;

  if (one_line(describe(m.generator.config)) != c.get("architecture.generator") ||
      one_line(describe(m.encoder.config)) != c.get("architecture.encoder") ||
      one_line(describe(m.discriminator.config)) != c.get("architecture.discriminator"))
    throw LoadError("checkpoint: stored architecture does not match the stored config");
  if (out.state.fingerprint != c.get("fingerprint")) throw LoadError("checkpoint: fingerprint mismatch");
  if (expected) {
    const Model<Real> probe = init_state(*expected, image_shape_for(*expected)).model;
    if (architecture_text(probe) != architecture_text(m) || !(probe.spec == m.spec))
      throw LoadError("checkpoint: architecture does not match the requested configuration");
  }

  take_network(c, "G", m.generator);
  take_network(c, "E", m.encoder);
  take_network(c, "D", m.discriminator);
  take_adam(c, "adam.D", out.state.adam_d, m.discriminator);
  take_adam(c, "adam.G", out.state.adam_g, m.generator);
  take_adam(c, "adam.E", out.state.adam_e, m.encoder);
  out.state.iteration = std::stoll(c.get("iteration"));
  std::istringstream rng(c.get("rng"));
  rng >> out.state.rng;
  if (!rng) throw LoadError("checkpoint: bad rng state");
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const RunConfig* expected) {
  return checkpoint_from_container(load_container(path), expected);
}

}  // namespace disrep
