#include "dider/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dider/errors.hpp"

namespace dider {
inline namespace DIDER_ABI {

namespace {

constexpr char kMagic[8] = {'D', 'I', 'D', 'E', 'R', 'C', 'K', 'P'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  auto bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    need(sizeof(T), what);
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }
  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CorruptDataError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                             std::to_string(pos_) + " of " + std::to_string(bytes_.size()));
    }
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

CheckpointEntry CheckpointEntry::floats(std::string name, std::vector<std::uint64_t> dims, std::vector<float> values) {
  CheckpointEntry e;
  e.name = std::move(name);
  e.type = EntryType::f32;
  e.dims = std::move(dims);
  e.f32 = std::move(values);
  if (e.count() != e.f32.size()) throw ContractError("checkpoint entry '" + e.name + "': dims do not match values");
  return e;
}

CheckpointEntry CheckpointEntry::bytes(std::string name, const std::string& text) {
  CheckpointEntry e;
  e.name = std::move(name);
  e.type = EntryType::u8;
  e.dims = {text.size()};
  e.u8.assign(text.begin(), text.end());
  return e;
}

CheckpointEntry CheckpointEntry::integers(std::string name, std::vector<std::uint64_t> values) {
  CheckpointEntry e;
  e.name = std::move(name);
  e.type = EntryType::u64;
  e.dims = {values.size()};
  e.u64 = std::move(values);
  return e;
}

std::uint64_t CheckpointEntry::count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string CheckpointEntry::text() const { return std::string(u8.begin(), u8.end()); }

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint64_t>(entries.size()));
  for (const auto& e : entries) {
    put(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put(out, static_cast<std::uint8_t>(e.type));
    put(out, static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) put(out, d);
    switch (e.type) {
      case EntryType::f32:
        for (float v : e.f32) put(out, v);
        break;
      case EntryType::u8:
        out.insert(out.end(), e.u8.begin(), e.u8.end());
        break;
      case EntryType::u64:
        for (auto v : e.u64) put(out, v);
        break;
    }
  }
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.text(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic))) {
    throw CorruptDataError("not a checkpoint file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  const auto n = in.get<std::uint64_t>("entry count");
  std::vector<CheckpointEntry> entries;
  for (std::uint64_t i = 0; i < n; ++i) {
    CheckpointEntry e;
    e.name = in.text(in.get<std::uint32_t>("name length"), "entry name");
    const auto type = in.get<std::uint8_t>("entry type");
    if (type < 1 || type > 3) throw CorruptDataError("checkpoint entry '" + e.name + "' has unknown type");
    e.type = static_cast<EntryType>(type);
    const auto rank = in.get<std::uint32_t>("rank");
    for (std::uint32_t r = 0; r < rank; ++r) e.dims.push_back(in.get<std::uint64_t>("dims"));
    const std::uint64_t count = e.count();
    const std::size_t width = e.type == EntryType::f32 ? 4 : e.type == EntryType::u8 ? 1 : 8;
    if (count > bytes.size() / width) throw CorruptDataError("checkpoint entry '" + e.name + "' is larger than the file");
    in.need(count * width, "payload");
    switch (e.type) {
      case EntryType::f32:
        e.f32.reserve(count);
        for (std::uint64_t k = 0; k < count; ++k) e.f32.push_back(in.get<float>("payload"));
        break;
      case EntryType::u8:
        for (std::uint64_t k = 0; k < count; ++k) e.u8.push_back(in.get<std::uint8_t>("payload"));
        break;
      case EntryType::u64:
        for (std::uint64_t k = 0; k < count; ++k) e.u64.push_back(in.get<std::uint64_t>("payload"));
        break;
    }
    entries.push_back(std::move(e));
  }
  if (!in.done()) throw CorruptDataError("checkpoint has trailing bytes");
  return entries;
}

void write_checkpoint_file(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries) {
  const auto bytes = encode_checkpoint(entries);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<CheckpointEntry> read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

const CheckpointEntry& find_entry(const std::vector<CheckpointEntry>& entries, const std::string& name,
                                  EntryType type) {
  for (const auto& e : entries) {
    if (e.name == name) {
      if (e.type != type) throw CorruptDataError("checkpoint entry '" + name + "' has the wrong type");
      return e;
    }
  }
  throw CorruptDataError("checkpoint is missing entry '" + name + "'");
}

}  // namespace DIDER_ABI
}  // namespace dider
