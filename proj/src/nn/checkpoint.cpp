#include "xgan/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "xgan/errors.hpp"

namespace xgan {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'X', 'G', 'A', 'N'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kF32 = 1;
constexpr std::uint8_t kF64 = 2;

class Writer {
 public:
  explicit Writer(std::vector<char>& buf) : buf_(buf) {}
  template <typename V>
  void put(V v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(V));
  }
  void bytes(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void str(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const std::string& name, const Tensor<float>& t) {
    str(name);
    put(kF32);
    put(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put(static_cast<std::uint64_t>(d));
    bytes(t.ptr(), t.size() * sizeof(float));
  }

 private:
  std::vector<char>& buf_;
};

class Reader {
 public:
  Reader(const std::vector<char>& buf, std::string path) : buf_(buf), path_(std::move(path)) {}
  template <typename V>
  V get() {
    V v;
    need(sizeof(V));
    std::memcpy(&v, buf_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == buf_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError(path_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) fail("truncated file");
  }
  const std::vector<char>& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore<float>& store, std::uint64_t step,
                     const std::string& config_json) {
  std::vector<char> buf;
  Writer w(buf);
  w.bytes(kMagic, 4);
  w.put(kVersion);
  w.put(step);
  w.put(static_cast<std::uint32_t>(store.slots().size() * 3));
  for (const auto& [id, s] : store.slots()) {
    w.tensor(id, s.value);
    w.tensor(id + "@adam_m", s.adam_m);
    w.tensor(id + "@adam_v", s.adam_v);
  }
  w.put(static_cast<std::uint32_t>(store.aliases().size()));
  for (const auto& [name, id] : store.aliases()) {
    w.str(name);
    w.str(id);
  }
  w.str(config_json);

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp.string() + ": cannot open for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError(tmp.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path.string() + ": cannot move checkpoint into place: " + ec.message());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path.string() + ": cannot open checkpoint");
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf, path.string());

  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) r.fail("bad magic");
  if (const auto v = r.get<std::uint32_t>(); v != kVersion) r.fail("unsupported version " + std::to_string(v));

  CheckpointData data;
  data.step = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto dtype = r.get<std::uint8_t>();
    if (dtype != kF32 && dtype != kF64) r.fail("record '" + name + "' has unknown dtype " + std::to_string(dtype));
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) r.fail("record '" + name + "' has rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    const std::size_t n = shape_size(shape);
    std::vector<float> values(n);
    if (dtype == kF32) {
      r.raw(values.data(), n * sizeof(float));
    } else {
      std::vector<double> wide(n);
      r.raw(wide.data(), n * sizeof(double));
      for (std::size_t k = 0; k < n; ++k) values[k] = static_cast<float>(wide[k]);
    }
    try {
      data.records.emplace(std::move(name), Tensor<float>(std::move(shape), std::move(values)));
    } catch (const NumericError&) {
      r.fail("non-finite payload");
    }
  }
  const auto n_alias = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_alias; ++i) {
    std::string name = r.str();
    data.aliases[name] = r.str();
  }
  data.config_json = r.str();
  if (!r.done()) r.fail("trailing bytes");
  return data;
}

void restore_store(ParameterStore<float>& store, const CheckpointData& data) {
  if (store.aliases() != data.aliases) throw CheckpointError("checkpoint alias table does not match the model");
  if (data.records.size() != store.slots().size() * 3)
    throw CheckpointError("checkpoint has " + std::to_string(data.records.size()) + " records, model needs " +
                          std::to_string(store.slots().size() * 3));
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor<float>& {
    auto it = data.records.find(name);
    if (it == data.records.end()) throw CheckpointError("checkpoint lacks record '" + name + "'");
    if (it->second.shape() != shape)
      throw CheckpointError("checkpoint record '" + name + "' has shape " + shape_str(it->second.shape()) +
                            ", model expects " + shape_str(shape));
    return it->second;
  };
  for (const std::string& id : store.slot_ids()) {
    ParamSlot<float>& s = store.slot(id);
    const Shape shape = s.value.shape();
    s.value = fetch(id, shape);
    s.adam_m = fetch(id + "@adam_m", shape);
    s.adam_v = fetch(id + "@adam_v", shape);
  }
}

}  // namespace xgan
