#include "slapseg/detnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "slapseg/common/digest.hpp"
#include "slapseg/common/error.hpp"

namespace slapseg::det {

namespace {

constexpr std::size_t kDigestSize = 64;  // hex characters

class Writer {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    const auto* p = take(n);
    return {reinterpret_cast<const char*>(p), n};
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > size_ - pos_) throw CorruptFileError("checkpoint ends early");
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void put_config(Writer& w, const ModelConfig& c) {
  for (double s : c.anchors.scales) w.put(s);
  for (double r : c.anchors.ratios) w.put(r);
  w.put(static_cast<std::int32_t>(c.anchors.stride));
  for (int ch : c.channels) w.put(static_cast<std::int32_t>(ch));
  for (int v : {c.rpn_channels, c.head_hidden, c.box_pool, c.mask_pool, c.mask_channels, c.sampling_ratio,
                c.num_classes}) {
    w.put(static_cast<std::int32_t>(v));
  }
}

ModelConfig get_config(Reader& r) {
  ModelConfig c;
  for (double& s : c.anchors.scales) s = r.get<double>();
  for (double& v : c.anchors.ratios) v = r.get<double>();
  c.anchors.stride = r.get<std::int32_t>();
  for (int& ch : c.channels) ch = r.get<std::int32_t>();
  for (int* v : {&c.rpn_channels, &c.head_hidden, &c.box_pool, &c.mask_pool, &c.mask_channels, &c.sampling_ratio,
                 &c.num_classes}) {
    *v = r.get<std::int32_t>();
  }
  return c;
}

}  // namespace

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  params.validate();
  Writer w;
  w.put_bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.put(kCheckpointVersion);
  put_config(w, params.config);
  w.put(static_cast<std::uint32_t>(params.tensors.size()));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const Tensor& t = params.tensors[i];
    w.put_string(param_names()[i]);
    w.put(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.put(static_cast<std::int32_t>(d));
    w.put_bytes(t.data.data(), t.size() * sizeof(double));
  }
  const std::string digest = sha256_hex(std::span<const std::uint8_t>(w.bytes()));
  w.put_bytes(digest.data(), digest.size());

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelParams load_model(const std::filesystem::path& path, const AnchorConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof kCheckpointMagic + sizeof(std::uint32_t) + kDigestSize) {
    throw CorruptFileError("checkpoint " + path.string() + " is truncated");
  }
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw CorruptFileError(path.string() + " is not a model checkpoint");
  }
  const std::size_t body = bytes.size() - kDigestSize;
  const std::string stored(reinterpret_cast<const char*>(bytes.data() + body), kDigestSize);
  if (sha256_hex(std::span<const std::uint8_t>(bytes.data(), body)) != stored) {
    throw CorruptFileError("checkpoint " + path.string() + " is truncated or damaged (checksum mismatch)");
  }

  Reader r(bytes.data(), body);
  r.take(sizeof kCheckpointMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  ModelParams p;
  p.config = get_config(r);
  if (expected && !(p.config.anchors == *expected)) {
    throw VersionError("checkpoint " + path.string() + " was trained with a different anchor configuration");
  }
  try {
    p.config.validate();
  } catch (const ValidationError& e) {
    throw VersionError(std::string("checkpoint configuration is not usable: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  if (count != kParamCount) throw VersionError("checkpoint has " + std::to_string(count) + " tensors");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_string();
    if (name != param_names()[i]) throw VersionError("checkpoint tensor " + name + " is not expected here");
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw CorruptFileError("checkpoint tensor " + name + " has implausible rank");
    std::vector<int> dims(rank);
    for (int& d : dims) d = r.get<std::int32_t>();
    Tensor t(dims);
    std::memcpy(t.data.data(), r.take(t.size() * sizeof(double)), t.size() * sizeof(double));
    p.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw CorruptFileError("checkpoint has trailing data");
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw VersionError(std::string("checkpoint does not match its configuration: ") + e.what());
  }
  return p;
}

}  // namespace slapseg::det
