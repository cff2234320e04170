#include "mnmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "mnmt/error.hpp"

namespace mnmt {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_string(std::string& out, std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("string too long for checkpoint");
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte(pos_ + i)) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte(pos_ + i)) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t position() const { return pos_; }

 private:
  unsigned char byte(std::size_t i) const { return static_cast<unsigned char>(bytes_[i]); }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CorruptionError("checkpoint truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string serialize_checkpoint(const std::string& config, const TensorMap& tensors) {
  std::string out(kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_string(out, config);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    put_string(out, name);
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : tensor.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  put_u64(out, fnv1a64(out));
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 8 || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw CorruptionError("not a checkpoint (bad magic)");
  }
  const auto body = bytes.substr(0, bytes.size() - 8);
  Reader trailer(bytes.substr(bytes.size() - 8));
  if (trailer.u64() != fnv1a64(body)) throw CorruptionError("checkpoint checksum mismatch");

  Reader in(body);
  in.bytes(kCheckpointMagic.size());
  const auto version = in.u32();
  if (version != kCheckpointVersion) {
    throw CorruptionError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config = std::string(in.bytes(in.u32()));
  const auto count = in.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name(in.bytes(in.u32()));
    const auto rank = in.u32();
    std::vector<std::size_t> shape;
    std::size_t elements = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(in.u32());
      elements *= shape.back();
    }
    if (elements > (body.size() - in.position()) / 4) throw CorruptionError("tensor '" + name + "' truncated");
    std::vector<double> data(elements);
    for (auto& v : data) v = static_cast<double>(std::bit_cast<float>(in.u32()));
    if (!ckpt.tensors.emplace(name, Tensor(std::move(shape), std::move(data))).second) {
      throw CorruptionError("duplicate tensor '" + name + "' in checkpoint");
    }
  }
  if (in.position() != body.size()) throw CorruptionError("trailing bytes in checkpoint");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const std::string& config,
                     const TensorMap& tensors) {
  const auto bytes = serialize_checkpoint(config, tensors);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const CorruptionError& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
}

std::uint64_t checkpoint_checksum(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 8) throw CorruptionError(path.string() + ": checkpoint truncated");
  Reader trailer(std::string_view(bytes).substr(bytes.size() - 8));
  return trailer.u64();
}

ParamSet to_param_set(const Checkpoint& checkpoint) {
  ParamSet params;
  for (const auto& [name, tensor] : checkpoint.tensors) params.add(name, tensor);
  return params;
}

}  // namespace mnmt
