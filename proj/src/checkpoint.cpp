#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mftraj/error.hpp"
#include "mftraj/model.hpp"

namespace mftraj {

namespace {

constexpr char kMagic[8] = {'M', 'F', 'T', 'R', 'A', 'J', 'C', 'K'};

class Writer {
 public:
  void bytes(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  template <typename U>
  void uint(U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
  void string(std::string_view s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::string_view bytes(std::size_t n) {
    if (in_.size() - pos_ < n) throw IoError("checkpoint is truncated at byte " + std::to_string(pos_));
    const std::string_view s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename U>
  U uint() {
    const std::string_view s = bytes(sizeof(U));
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<unsigned char>(s[i])) << (8 * i);
    return value;
  }
  std::string string() {
    const auto n = uint<std::uint32_t>();
    return std::string(bytes(n));
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

template <typename Scalar>
DType dtype_of() {
  return sizeof(Scalar) == 4 ? DType::f32 : DType::f64;
}

template <typename Scalar>
NamedArray to_array(std::string name, const Shape& shape, const ad::Vector<Scalar>& values) {
  NamedArray a{std::move(name), dtype_of<Scalar>(), shape, {}};
  a.values.assign(values.begin(), values.end());
  return a;
}

NamedArray stats_array(std::string name, const Eigen::Matrix<double, kBehaviorFeatures, 1>& v) {
  NamedArray a{std::move(name), DType::f64, {kBehaviorFeatures}, {}};
  a.values.assign(v.begin(), v.end());
  return a;
}

}  // namespace

const NamedArray* Checkpoint::find(std::string_view name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

std::string Checkpoint::serialize() const {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint(kVersion);
  w.string(config.to_key_values().to_text());
  w.uint(step);
  w.uint(static_cast<std::uint32_t>(arrays.size()));
  for (const NamedArray& a : arrays) {
    if (static_cast<Index>(a.values.size()) != ad::shape_size(a.shape))
      throw ShapeError("checkpoint array '" + a.name + "' has " + std::to_string(a.values.size()) +
                       " values for shape " + ad::shape_string(a.shape));
    w.string(a.name);
    w.uint(static_cast<std::uint8_t>(a.dtype));
    w.uint(static_cast<std::uint32_t>(a.shape.size()));
    for (Index d : a.shape) w.uint(static_cast<std::uint64_t>(d));
    for (double x : a.values) {
      if (a.dtype == DType::f32)
        w.uint(std::bit_cast<std::uint32_t>(static_cast<float>(x)));
      else
        w.uint(std::bit_cast<std::uint64_t>(x));
    }
  }
  return w.take();
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) throw IoError("not a checkpoint file");
  const auto version = r.uint<std::uint32_t>();
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  std::istringstream text(r.string());
  c.config = ModelConfig::from_key_values(KeyValueConfig::parse(text, "checkpoint config"));
  c.step = r.uint<std::uint64_t>();
  const auto count = r.uint<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray a;
    a.name = r.string();
    const auto dtype = r.uint<std::uint8_t>();
    if (dtype > 1) throw IoError("checkpoint array '" + a.name + "' has unknown dtype " + std::to_string(dtype));
    a.dtype = static_cast<DType>(dtype);
    const auto rank = r.uint<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) a.shape.push_back(static_cast<Index>(r.uint<std::uint64_t>()));
    const Index n = ad::shape_size(a.shape);
    a.values.resize(static_cast<std::size_t>(n));
    for (auto& x : a.values)
      x = a.dtype == DType::f32 ? static_cast<double>(std::bit_cast<float>(r.uint<std::uint32_t>()))
                                : std::bit_cast<double>(r.uint<std::uint64_t>());
    c.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw IoError("trailing bytes after checkpoint tensors");
  const NamedArray* mean = c.find("stats/mean");
  const NamedArray* stddev = c.find("stats/stddev");
  if (mean == nullptr || stddev == nullptr || mean->values.size() != kBehaviorFeatures ||
      stddev->values.size() != kBehaviorFeatures)
    throw IoError("checkpoint lacks behavior statistics");
  for (int f = 0; f < kBehaviorFeatures; ++f) {
    c.stats.mean[f] = mean->values[static_cast<std::size_t>(f)];
    c.stats.stddev[f] = stddev->values[static_cast<std::size_t>(f)];
  }
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

template <typename Scalar>
Checkpoint make_checkpoint(const MFTrajModel<Scalar>& model, const FeatureStats& stats,
                           const std::vector<ad::Vector<Scalar>>* adam_m, const std::vector<ad::Vector<Scalar>>* adam_v,
                           std::uint64_t step) {
  Checkpoint c;
  c.config = model.config();
  c.stats = stats;
  c.step = step;
  const auto& entries = model.parameters().entries();
  for (const auto& [name, t] : entries) c.arrays.push_back(to_array<Scalar>("param/" + name, t.shape(), t.values()));
  for (std::size_t p = 0; p < entries.size(); ++p) {
    const auto& [name, t] = entries[p];
    c.arrays.push_back(to_array<Scalar>("adam_m/" + name, t.shape(),
                                        adam_m ? (*adam_m)[p] : ad::Vector<Scalar>::Zero(t.size()).eval()));
    c.arrays.push_back(to_array<Scalar>("adam_v/" + name, t.shape(),
                                        adam_v ? (*adam_v)[p] : ad::Vector<Scalar>::Zero(t.size()).eval()));
  }
  c.arrays.push_back(stats_array("stats/mean", stats.mean));
  c.arrays.push_back(stats_array("stats/stddev", stats.stddev));
  return c;
}

template <typename Scalar>
MFTrajModel<Scalar> model_from_checkpoint(const Checkpoint& checkpoint) {
  ParameterStore<Scalar> store;
  for (const NamedArray& a : checkpoint.arrays) {
    if (!a.name.starts_with("param/")) continue;
    if (a.dtype != dtype_of<Scalar>())
      throw ConfigError("checkpoint parameter '" + a.name + "' has a different precision than requested");
    ad::Vector<Scalar> v(static_cast<Index>(a.values.size()));
    for (std::size_t i = 0; i < a.values.size(); ++i) v[static_cast<Index>(i)] = static_cast<Scalar>(a.values[i]);
    store.add(a.name.substr(6), Tensor<Scalar>::variable(a.shape, std::move(v)));
  }
  return MFTrajModel<Scalar>(checkpoint.config, std::move(store));
}

template Checkpoint make_checkpoint(const MFTrajModel<double>&, const FeatureStats&,
                                    const std::vector<ad::Vector<double>>*, const std::vector<ad::Vector<double>>*,
                                    std::uint64_t);
template Checkpoint make_checkpoint(const MFTrajModel<float>&, const FeatureStats&,
                                    const std::vector<ad::Vector<float>>*, const std::vector<ad::Vector<float>>*,
                                    std::uint64_t);
template MFTrajModel<double> model_from_checkpoint(const Checkpoint&);
template MFTrajModel<float> model_from_checkpoint(const Checkpoint&);

}  // namespace mftraj
