#include "dm/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "dm/error.hpp"

namespace dm::nn {

namespace {

std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k)
      c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size())
      throw CorruptCheckpoint("truncated checkpoint");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(size_t n) {
    if (pos_ + n > bytes_.size())
      throw CorruptCheckpoint("truncated checkpoint");
    std::string_view v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }

  size_t pos() const { return pos_; }

 private:
  std::string_view bytes_;
  size_t pos_ = 0;
};

}  // namespace

uint32_t crc32(std::string_view bytes) {
  static const std::array<uint32_t, 256> table = make_crc_table();
  uint32_t c = 0xFFFFFFFFu;
  for (unsigned char b : bytes) c = table[(c ^ b) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out.append("DMCK", 4);
  put<uint32_t>(out, kCheckpointVersion);
  std::string json = ckpt.metadata.dump();
  put<uint64_t>(out, json.size());
  out.append(json);
  put<uint32_t>(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    put<uint64_t>(out, static_cast<uint64_t>(t.rows()));
    put<uint64_t>(out, static_cast<uint64_t>(t.cols()));
    out.append(reinterpret_cast<const char*>(t.data()),
               static_cast<size_t>(t.size()) * sizeof(double));
  }
  put<uint32_t>(out, crc32(out));
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 + 4 + 8 + 4 + 4)
    throw CorruptCheckpoint("checkpoint too small");
  uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  if (crc32(bytes.substr(0, bytes.size() - 4)) != stored_crc)
    throw CorruptCheckpoint("checksum mismatch");

  Reader r(bytes.substr(0, bytes.size() - 4));
  if (r.take(4) != "DMCK") throw CorruptCheckpoint("bad magic");
  uint32_t version = r.get<uint32_t>();
  if (version != kCheckpointVersion)
    throw VersionMismatch("checkpoint version " + std::to_string(version) +
                          ", expected " + std::to_string(kCheckpointVersion));

  Checkpoint ckpt;
  uint64_t json_len = r.get<uint64_t>();
  std::string_view json = r.take(json_len);
  ckpt.metadata = nlohmann::json::parse(json, nullptr, false);
  if (ckpt.metadata.is_discarded())
    throw CorruptCheckpoint("metadata is not valid JSON");

  uint32_t count = r.get<uint32_t>();
  ckpt.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = r.get<uint32_t>();
    std::string name(r.take(name_len));
    int64_t rows = static_cast<int64_t>(r.get<uint64_t>());
    int64_t cols = static_cast<int64_t>(r.get<uint64_t>());
    if (rows < 0 || cols < 0 || rows * cols > (1ll << 32))
      throw CorruptCheckpoint("implausible tensor shape");
    Tensor t(rows, cols);
    std::string_view raw = r.take(static_cast<size_t>(t.size()) * sizeof(double));
    std::memcpy(t.data(), raw.data(), raw.size());
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

void write_checkpoint_file(const std::filesystem::path& path,
                           const Checkpoint& ckpt) {
  std::string bytes = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)),
                    std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace dm::nn
