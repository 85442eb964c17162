#include "lphom/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lphom/errors.hpp"

namespace lphom {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using Kind = CheckpointError::Kind;

class Writer {
 public:
  template <typename V>
  void put(V v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(V));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    put_bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& buf, std::size_t end, const std::string& path)
      : buf_(buf), end_(end), path_(path) {}

  template <typename V>
  V get() {
    V v;
    take(&v, sizeof(V));
    return v;
  }
  void take(void* out, std::size_t n) {
    if (n > end_ - pos_) throw CheckpointError(Kind::kChecksum, path_ + ": record runs past end of file");
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    if (n > end_ - pos_) throw CheckpointError(Kind::kChecksum, path_ + ": string runs past end of file");
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::vector<std::uint8_t>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string path_;
};

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.put_bytes(kCheckpointMagic, kMagicLen);
  w.put_string(ckpt.config);
  w.put<double>(ckpt.latent_scale);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.put_string(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) w.put<std::int32_t>(d);
    w.put_bytes(t.raw(), t.size() * sizeof(float));
  }
  w.put<std::uint64_t>(fnv1a64(w.bytes().data(), w.bytes().size()));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::kIo, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw CheckpointError(Kind::kIo, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("checkpoint not found: " + p);
  const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < kMagicLen || std::memcmp(buf.data(), kCheckpointMagic, kMagicLen) != 0) {
    throw CheckpointError(Kind::kBadMagic, p + ": not a checkpoint (bad magic)");
  }
  if (buf.size() < kMagicLen + sizeof(std::uint64_t)) {
    throw CheckpointError(Kind::kChecksum, p + ": checksum mismatch (file truncated)");
  }
  const std::size_t body = buf.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + body, sizeof stored);
  if (stored != fnv1a64(buf.data(), body)) throw CheckpointError(Kind::kChecksum, p + ": checksum mismatch");

  Reader r(buf, body, p);
  char magic[kMagicLen];
  r.take(magic, kMagicLen);
  Checkpoint ck;
  ck.config = r.get_string();
  ck.latent_scale = r.get<double>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw CheckpointError(Kind::kShapeMismatch, p + ": tensor " + name + " has rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.get<std::int32_t>();
      if (d <= 0) throw CheckpointError(Kind::kShapeMismatch, p + ": tensor " + name + " has a non-positive dim");
      numel *= static_cast<std::size_t>(d);
    }
    std::vector<float> data(numel);
    r.take(data.data(), numel * sizeof(float));
    ck.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw CheckpointError(Kind::kChecksum, p + ": trailing bytes after last tensor");
  return ck;
}

void add_parameters(Checkpoint& ckpt, const ParameterSet<float>& params, const std::string& prefix) {
  for (std::size_t i = 0; i < params.count(); ++i) {
    const int id = static_cast<int>(i);
    ckpt.tensors.emplace_back(prefix + params.name(id), params.at(id).value);
  }
}

void restore_parameters(const Checkpoint& ckpt, ParameterSet<float>& params, const std::string& prefix) {
  for (std::size_t i = 0; i < params.count(); ++i) {
    const int id = static_cast<int>(i);
    const std::string name = prefix + params.name(id);
    const Tensor* t = ckpt.find(name);
    if (!t) throw CheckpointError(Kind::kMissingTensor, "checkpoint lacks tensor " + name);
    auto& dst = params.at(id).value;
    if (t->shape() != dst.shape()) {
      throw CheckpointError(Kind::kShapeMismatch, "tensor " + name + " has shape " + shape_str(t->shape()) +
                                                      " in checkpoint but model expects " + shape_str(dst.shape()));
    }
    dst = *t;
  }
}

}  // namespace lphom
