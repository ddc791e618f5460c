#include "disrep/netspec.hpp"

#include <algorithm>
#include <sstream>

namespace disrep {

namespace {

LayerDesc conv(int kernel, int units, int stride, double dropout = 0.0) {
  return {LayerKind::convolution, kernel, units, stride, Activation::elu, true, dropout, {}};
}

LayerDesc tconv(int kernel, int units, int stride) {
  return {LayerKind::transposed_convolution, kernel, units, stride, Activation::elu, true, 0.0, {}};
}

LayerDesc fc(int units, double dropout = 0.0) {
  return {LayerKind::fully_connected, 0, units, 1, Activation::elu, true, dropout, {}};
}

LayerDesc reshape(Shape s) { return {LayerKind::reshape, 0, s.size(), 1, Activation::linear, false, 0.0, s}; }

LayerDesc head(int units, Activation act) { return {LayerKind::output_head, 0, units, 1, act, false, 0.0, {}}; }

int scaled(int n, int divisor) { return std::max(1, n / divisor); }

void check_image(const Shape& image, int multiple) {
  if (image.height <= 0 || image.width <= 0 || image.channels <= 0)
    throw ConfigError("image shape must be positive");
  if (image.height % multiple != 0 || image.width % multiple != 0)
    throw ConfigError("image height and width must be multiples of " + std::to_string(multiple) + ", got " +
                      std::to_string(image.height) + "x" + std::to_string(image.width));
}

constexpr double kDiscriminatorDropout = 0.3;

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::convolution: return "conv";
    case LayerKind::transposed_convolution: return "deconv";
    case LayerKind::fully_connected: return "fc";
    case LayerKind::reshape: return "reshape";
    case LayerKind::concatenate: return "concatenate";
    case LayerKind::dropout: return "dropout";
    case LayerKind::output_head: return "head";
  }
  return "?";
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::elu: return "elu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
    case Activation::linear: return "linear";
  }
  return "?";
}

std::string shape_str(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

}  // namespace

std::string to_string(NetRole role) {
  switch (role) {
    case NetRole::generator: return "generator";
    case NetRole::encoder: return "encoder";
    case NetRole::discriminator: return "discriminator";
    case NetRole::classifier: return "classifier";
  }
  return "?";
}

std::string to_string(const LatentSpec& spec) {
  std::ostringstream os;
  os << "u_dim=" << spec.u_dim << " cat_dims=";
  for (size_t i = 0; i < spec.cat_dims.size(); ++i) os << (i ? "," : "") << spec.cat_dims[i];
  os << " cont_dim=" << spec.cont_dim;
  return os.str();
}

const Branch& NetworkConfig::branch(const std::string& name) const {
  for (const auto& b : branches)
    if (b.name == name) return b;
  throw ArgumentError("network has no branch named '" + name + "'");
}

FamilyConfigs build_mnist_family(const LatentSpec& spec, Shape image, int width_divisor) {
  spec.validate();
  check_image(image, 4);
  if (width_divisor < 1) throw ConfigError("width_divisor must be >= 1");
  const int d = width_divisor;
  const Shape code{1, 1, spec.total_dim()};
  const Shape seed{image.height / 4, image.width / 4, scaled(64, d)};

  FamilyConfigs f;
  f.generator.role = NetRole::generator;
  f.generator.branches = {{"main", code,
                           {fc(seed.size()), reshape(seed), tconv(4, scaled(128, d), 2), tconv(4, scaled(64, d), 1),
                            {LayerKind::transposed_convolution, 4, image.channels, 2, Activation::sigmoid, false, 0.0, {}}}}};

  f.encoder.role = NetRole::encoder;
  f.encoder.branches = {{"main", image,
                         {conv(3, scaled(32, d), 1), conv(3, scaled(64, d), 2), conv(3, scaled(128, d), 2),
                          fc(scaled(1024, d)), head(encoder_head_width(spec), Activation::linear)}}};

  const double p = kDiscriminatorDropout;
  const int branch_units = scaled(512, d);
  f.discriminator.role = NetRole::discriminator;
  f.discriminator.branches = {
      {"image", image, {conv(3, scaled(64, d), 2, p), conv(3, scaled(128, d), 2, p), fc(branch_units, p)}},
      {"code", code, {conv(1, scaled(64, d), 1, p), conv(1, scaled(128, d), 1, p), fc(branch_units, p)}},
      {"joint",
       {1, 1, 2 * branch_units},
       {{LayerKind::concatenate, 0, 2 * branch_units, 1, Activation::linear, false, 0.0, {}},
        fc(scaled(1024, d), p),
        head(1, Activation::sigmoid)}}};
  validate(f.generator);
  validate(f.encoder);
  validate(f.discriminator);
  return f;
}

FamilyConfigs build_svhn_celeba_family(const LatentSpec& spec, Shape image, int width_divisor) {
  spec.validate();
  check_image(image, 8);
  if (width_divisor < 1) throw ConfigError("width_divisor must be >= 1");
  const int d = width_divisor;
  const Shape code{1, 1, spec.total_dim()};
  const Shape seed{image.height / 8, image.width / 8, scaled(128, d)};

  FamilyConfigs f;
  f.generator.role = NetRole::generator;
  f.generator.branches = {{"main", code,
                           {fc(seed.size()), reshape(seed), tconv(4, scaled(128, d), 2), tconv(4, scaled(64, d), 2),
                            tconv(4, scaled(32, d), 2),
                            {LayerKind::transposed_convolution, 3, image.channels, 1, Activation::sigmoid, false, 0.0, {}}}}};

  f.encoder.role = NetRole::encoder;
  f.encoder.branches = {{"main", image,
                         {conv(3, scaled(32, d), 1), conv(3, scaled(64, d), 2), conv(3, scaled(128, d), 1),
                          conv(3, scaled(256, d), 2), conv(3, scaled(512, d), 2), fc(scaled(1024, d)),
                          head(encoder_head_width(spec), Activation::linear)}}};

  const double p = kDiscriminatorDropout;
  const int branch_units = scaled(1024, d);
  f.discriminator.role = NetRole::discriminator;
  f.discriminator.branches = {
      {"image",
       image,
       {conv(4, scaled(64, d), 2, p), conv(4, scaled(128, d), 2, p), conv(4, scaled(256, d), 2, p),
        fc(branch_units, p)}},
      {"code",
       code,
       {conv(1, scaled(64, d), 1, p), conv(1, scaled(128, d), 1, p), conv(1, scaled(256, d), 1, p),
        fc(branch_units, p)}},
      {"joint",
       {1, 1, 2 * branch_units},
       {{LayerKind::concatenate, 0, 2 * branch_units, 1, Activation::linear, false, 0.0, {}},
        fc(scaled(1024, d), p),
        head(1, Activation::sigmoid)}}};
  validate(f.generator);
  validate(f.encoder);
  validate(f.discriminator);
  return f;
}

NetworkConfig build_classifier(const NetworkConfig& encoder, int num_classes) {
  if (num_classes < 2) throw ConfigError("classifier needs at least two classes");
  NetworkConfig c;
  c.role = NetRole::classifier;
  Branch b = encoder.branch("main");
  b.layers.erase(std::remove_if(b.layers.begin(), b.layers.end(),
                                [](const LayerDesc& l) { return l.kind != LayerKind::convolution; }),
                 b.layers.end());
  b.layers.push_back(head(num_classes, Activation::softmax));
  c.branches = {b};
  validate(c);
  return c;
}

Shape propagate(const Branch& branch) {
  Shape s = branch.input;
  if (s.size() <= 0) throw ConfigError(branch.name + ": empty input shape");
  for (size_t i = 0; i < branch.layers.size(); ++i) {
    const auto& l = branch.layers[i];
    const std::string where = branch.name + " layer " + std::to_string(i) + ": ";
    if (l.stride != 1 && l.stride != 2) throw ConfigError(where + "stride must be 1 or 2");
    if (l.dropout < 0.0 || l.dropout >= 1.0) throw ConfigError(where + "dropout must lie in [0, 1)");
    switch (l.kind) {
      case LayerKind::convolution:
      case LayerKind::transposed_convolution:
        if (l.kernel != 1 && l.kernel != 3 && l.kernel != 4) throw ConfigError(where + "kernel must be 1, 3 or 4");
        if (l.units <= 0) throw ConfigError(where + "channel count must be positive");
        if (l.kind == LayerKind::convolution)
          s = ConvGeometry::same(s, l.units, l.kernel, l.stride).out;
        else
          s = {s.height * l.stride, s.width * l.stride, l.units};
        break;
      case LayerKind::fully_connected:
      case LayerKind::output_head:
        if (l.units <= 0) throw ConfigError(where + "unit count must be positive");
        s = {1, 1, l.units};
        break;
      case LayerKind::reshape:
        if (l.reshape.size() != s.size())
          throw ConfigError(where + "reshape to " + shape_str(l.reshape) + " from " + std::to_string(s.size()) +
                            " features");
        s = l.reshape;
        break;
      case LayerKind::concatenate:
        if (l.units != s.size()) throw ConfigError(where + "concatenated width mismatch");
        break;
      case LayerKind::dropout:
        break;
    }
  }
  return s;
}

void validate(const NetworkConfig& config) {
  if (config.branches.empty()) throw ConfigError(to_string(config.role) + ": no layers");
  for (const auto& b : config.branches) propagate(b);

  const auto& last = config.branches.back();
  if (last.layers.empty()) throw ConfigError(to_string(config.role) + ": empty branch");
  switch (config.role) {
    case NetRole::generator:
      if (last.layers.back().activation != Activation::sigmoid)
        throw ConfigError("generator: final activation must be sigmoid");
      break;
    case NetRole::discriminator: {
      if (config.branches.size() != 3) throw ConfigError("discriminator: expected image, code and joint branches");
      const int joint = propagate(config.branches[0]).size() + propagate(config.branches[1]).size();
      if (config.branches[2].input.size() != joint) throw ConfigError("discriminator: joint input width mismatch");
      if (propagate(last).size() != 1 || last.layers.back().activation != Activation::sigmoid)
        throw ConfigError("discriminator: output must be one sigmoid unit");
      break;
    }
    case NetRole::encoder:
    case NetRole::classifier:
      if (last.layers.back().kind != LayerKind::output_head) throw ConfigError("encoder: missing output head");
      break;
  }
}

Shape output_shape(const NetworkConfig& config) { return propagate(config.branches.back()); }

std::string describe(const NetworkConfig& config) {
  std::ostringstream os;
  for (const auto& b : config.branches) {
    Shape s = b.input;
    os << to_string(config.role) << "." << b.name << " input " << shape_str(s) << "\n";
    for (const auto& l : b.layers) {
      os << "  " << kind_name(l.kind);
      if (l.kind == LayerKind::convolution || l.kind == LayerKind::transposed_convolution)
        os << " " << l.kernel << "x" << l.kernel << " " << l.units << " stride " << l.stride;
      else if (l.kind == LayerKind::reshape)
        os << " " << shape_str(l.reshape);
      else
        os << " " << l.units;
      if (l.batch_norm) os << " bn";
      if (l.activation != Activation::linear) os << " " << activation_name(l.activation);
      if (l.dropout > 0.0) os << " dropout " << l.dropout;
      os << "\n";
    }
    os << "  -> " << shape_str(propagate(b)) << "\n";
  }
  return os.str();
}

}  // namespace disrep
