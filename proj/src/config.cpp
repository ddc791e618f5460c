#include "disrep/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace disrep {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) throw ConfigError("config: bad value '" + value + "' for key '" + key + "'");
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<int>(key, item));
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fingerprint(const std::string& text) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

RunConfig RunConfig::for_preset(DatasetPreset preset) {
  RunConfig c;
  c.dataset = to_string(preset);
  c.iters = preset_train_iters(preset);
  c.ramp_iters = preset_ramp_iters(preset);
  switch (preset) {
    case DatasetPreset::mnist:
      c.family = "mnist";
      c.latent = LatentSpec::mnist();
      c.image_size = 28;
      c.labeled_count = 100;
      break;
    case DatasetPreset::svhn:
      c.family = "svhn";
      c.latent = LatentSpec::svhn();
      c.image_size = 32;
      c.labeled_count = 1000;
      break;
    case DatasetPreset::celeba:
      c.family = "svhn";
      c.latent = LatentSpec::celeba();
      c.image_size = 64;
      c.labeled_count = 1000;
      break;
    case DatasetPreset::shapes:
      c.family = "mnist";
      c.latent = {8, {3}, 2};
      c.image_size = 16;
      c.width_divisor = 2;
      c.labeled_count = 90;
      c.checkpoint_every = 1000;
      c.optimizer.lr_d = 4e-4;
      c.optimizer.lr_ge = 1.2e-3;
      break;
  }
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "dataset") {
    parse_preset(value);
    dataset = value;
  } else if (key == "family") {
    family = value;
  } else if (key == "image_size") {
    image_size = parse_number<int>(key, value);
  } else if (key == "width_divisor") {
    width_divisor = parse_number<int>(key, value);
  } else if (key == "u_dim") {
    latent.u_dim = parse_number<int>(key, value);
  } else if (key == "cat_dims") {
    latent.cat_dims = parse_int_list(key, value);
  } else if (key == "cont_dim") {
    latent.cont_dim = parse_number<int>(key, value);
  } else if (key == "lambda1") {
    weights.lambda1 = parse_number<double>(key, value);
  } else if (key == "lambda2") {
    weights.lambda2 = parse_number<double>(key, value);
  } else if (key == "lambda3") {
    weights.lambda3 = parse_number<double>(key, value);
  } else if (key == "lambda4") {
    weights.lambda4 = parse_number<double>(key, value);
  } else if (key == "lr_d") {
    optimizer.lr_d = parse_number<double>(key, value);
  } else if (key == "lr_ge") {
    optimizer.lr_ge = parse_number<double>(key, value);
  } else if (key == "beta1") {
    optimizer.beta1 = parse_number<double>(key, value);
  } else if (key == "beta2") {
    optimizer.beta2 = parse_number<double>(key, value);
  } else if (key == "adam_eps") {
    optimizer.eps = parse_number<double>(key, value);
  } else if (key == "batch_size") {
    optimizer.batch_size = parse_number<int>(key, value);
  } else if (key == "iters") {
    iters = parse_number<int64_t>(key, value);
  } else if (key == "ramp_iters") {
    ramp_iters = parse_number<int64_t>(key, value);
  } else if (key == "labeled_count") {
    labeled_count = parse_number<int>(key, value);
  } else if (key == "checkpoint_every") {
    checkpoint_every = parse_number<int64_t>(key, value);
  } else if (key == "seed") {
    seed = parse_number<uint64_t>(key, value);
  } else if (key == "data_dir") {
    data_dir = value;
  } else if (key == "shapes_train") {
    shapes_train = parse_number<int>(key, value);
  } else if (key == "shapes_test") {
    shapes_test = parse_number<int>(key, value);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

void RunConfig::validate() const {
  parse_preset(dataset);
  if (family != "mnist" && family != "svhn") throw ConfigError("config: family must be mnist or svhn");
  latent.validate();
  weights.validate();
  optimizer.validate();
  if (iters < 0 || ramp_iters < 0 || checkpoint_every < 0) throw ConfigError("config: negative iteration count");
  if (labeled_count < 1) throw ConfigError("config: labeled_count must be >= 1");
  if (width_divisor < 1) throw ConfigError("config: width_divisor must be >= 1");
  if (dataset == "shapes" && (shapes_train < labeled_count || shapes_test < 1))
    throw ConfigError("config: shapes dataset too small for labeled_count");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::string cats;
  for (size_t i = 0; i < latent.cat_dims.size(); ++i) cats += (i ? "," : "") + std::to_string(latent.cat_dims[i]);
  return {
      {"dataset", dataset},
      {"family", family},
      {"image_size", std::to_string(image_size)},
      {"width_divisor", std::to_string(width_divisor)},
      {"u_dim", std::to_string(latent.u_dim)},
      {"cat_dims", cats},
      {"cont_dim", std::to_string(latent.cont_dim)},
      {"lambda1", format_double(weights.lambda1)},
      {"lambda2", format_double(weights.lambda2)},
      {"lambda3", format_double(weights.lambda3)},
      {"lambda4", format_double(weights.lambda4)},
      {"lr_d", format_double(optimizer.lr_d)},
      {"lr_ge", format_double(optimizer.lr_ge)},
      {"beta1", format_double(optimizer.beta1)},
      {"beta2", format_double(optimizer.beta2)},
      {"adam_eps", format_double(optimizer.eps)},
      {"batch_size", std::to_string(optimizer.batch_size)},
      {"iters", std::to_string(iters)},
      {"ramp_iters", std::to_string(ramp_iters)},
      {"labeled_count", std::to_string(labeled_count)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"seed", std::to_string(seed)},
      {"data_dir", data_dir},
      {"shapes_train", std::to_string(shapes_train)},
      {"shapes_test", std::to_string(shapes_test)},
  };
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::pair<std::string, std::string>> kv;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  // A `dataset` key selects that preset's defaults; the other keys override them.
  for (const auto& [k, v] : kv)
    if (k == "dataset") base = RunConfig::for_preset(parse_preset(v));
  for (const auto& [k, v] : kv) base.set(k, v);
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

Shape image_shape_for(const RunConfig& config) {
  switch (config.preset()) {
    case DatasetPreset::mnist: return {28, 28, 1};
    case DatasetPreset::svhn: return {32, 32, 3};
    case DatasetPreset::celeba: return {config.image_size, config.image_size, 3};
    case DatasetPreset::shapes: return {config.image_size, config.image_size, 1};
  }
  return {28, 28, 1};
}

FamilyConfigs family_for(const RunConfig& config, Shape image) {
  if (config.family == "svhn") return build_svhn_celeba_family(config.latent, image, config.width_divisor);
  return build_mnist_family(config.latent, image, config.width_divisor);
}

}  // namespace disrep
