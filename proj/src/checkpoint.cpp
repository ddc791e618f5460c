#include "disrep/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "disrep/data.hpp"
#include "disrep/errors.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint arrays are written in native little-endian order");

namespace disrep {

namespace {

constexpr char kMagic[8] = {'D', 'I', 'S', 'R', 'E', 'P', 'C', 'K'};

template <typename T>
void put_le(std::vector<uint8_t>& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<uint8_t>(uint64_t(v) >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= uint64_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::span<const uint8_t> take(size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError("checkpoint: truncated at offset " + std::to_string(pos_) + " (need " + std::to_string(n) +
                        " bytes)");
  }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace

const std::string& Container::get(const std::string& key) const {
  for (const auto& [k, v] : manifest)
    if (k == key) return v;
  throw LoadError("checkpoint: manifest has no key '" + key + "'");
}

bool Container::has(const std::string& key) const {
  for (const auto& kv : manifest)
    if (kv.first == key) return true;
  return false;
}

const Container::Array& Container::array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw LoadError("checkpoint: missing array '" + name + "'");
}

std::vector<uint8_t> encode_container(const Container& c) {
  std::vector<uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<uint32_t>(out, c.version);
  std::string manifest;
  for (const auto& [k, v] : c.manifest) {
    if (k.find_first_of(":\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw ArgumentError("checkpoint: manifest entry '" + k + "' contains a reserved character");
    manifest += k + ": " + v + "\n";
  }
  put_le<uint64_t>(out, manifest.size());
  out.insert(out.end(), manifest.begin(), manifest.end());
  put_le<uint32_t>(out, static_cast<uint32_t>(c.arrays.size()));
  for (const auto& a : c.arrays) {
    put_le<uint32_t>(out, static_cast<uint32_t>(a.name.size()));
    out.insert(out.end(), a.name.begin(), a.name.end());
    out.push_back(a.element_size);
    put_le<uint32_t>(out, a.rows);
    put_le<uint32_t>(out, a.cols);
    out.insert(out.end(), a.bytes.begin(), a.bytes.end());
  }
  return out;
}

Container decode_container(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("checkpoint: bad magic at offset 0");
  Container c;
  c.version = r.get<uint32_t>();
  if (c.version != Container::kFormatVersion)
    throw LoadError("checkpoint: unsupported format version " + std::to_string(c.version));

  const auto manifest_len = r.get<uint64_t>();
  const auto text = r.take(manifest_len);
  std::string manifest(text.begin(), text.end());
  size_t start = 0;
  while (start < manifest.size()) {
    const size_t end = manifest.find('\n', start);
    if (end == std::string::npos) throw FormatError("checkpoint: unterminated manifest line");
    const std::string line = manifest.substr(start, end - start);
    const size_t sep = line.find(": ");
    if (sep == std::string::npos) throw FormatError("checkpoint: malformed manifest line '" + line + "'");
    c.manifest.emplace_back(line.substr(0, sep), line.substr(sep + 2));
    start = end + 1;
  }
  if (c.has("format_version") && c.get("format_version") != std::to_string(c.version))
    throw LoadError("checkpoint: manifest format_version '" + c.get("format_version") + "' disagrees with header " +
                    std::to_string(c.version));

  const auto count = r.get<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    Container::Array a;
    const auto name_len = r.get<uint32_t>();
    const auto name = r.take(name_len);
    a.name.assign(name.begin(), name.end());
    a.element_size = r.get<uint8_t>();
    if (a.element_size != 4 && a.element_size != 8)
      throw FormatError("checkpoint: bad element size for '" + a.name + "' at offset " + std::to_string(r.pos() - 1));
    a.rows = r.get<uint32_t>();
    a.cols = r.get<uint32_t>();
    const auto data = r.take(size_t(a.element_size) * a.rows * a.cols);
    a.bytes.assign(data.begin(), data.end());
    c.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes at offset " + std::to_string(r.pos()));
  return c;
}

void save_container(const Container& c, const std::filesystem::path& path) {
  write_file(path, encode_container(c));
}

Container load_container(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_container(bytes);
}

}  // namespace disrep
