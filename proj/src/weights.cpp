#include "tabdl/weights.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>

#include "tabdl/errors.hpp"

namespace tabdl {

namespace {

constexpr char kMagic[4] = {'A', 'D', 'P', 'M'};

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

class Reader {
public:
  Reader(const std::vector<std::uint8_t>& bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }

private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw format_error(source_ + ": truncated while reading " + what);
  }

  const std::vector<std::uint8_t>& bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> encode_weights(const std::vector<NamedTensor>& tensors) {
  if (tensors.size() > std::numeric_limits<std::uint32_t>::max()) throw argument_error("weights: too many tensors");
  std::size_t header = sizeof(kMagic) + 1 + 4;
  for (const auto& t : tensors) {
    if (t.name.size() > std::numeric_limits<std::uint16_t>::max()) throw argument_error("weights: name too long");
    header += 2 + t.name.size() + 1 + 4 * t.tensor.rank() + 8;
  }

  std::vector<std::uint8_t> out(kMagic, kMagic + sizeof(kMagic));
  out.push_back(kWeightFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  std::uint64_t offset = header;
  for (const auto& t : tensors) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    out.push_back(static_cast<std::uint8_t>(t.tensor.rank()));
    for (auto d : t.tensor.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    put<std::uint64_t>(out, offset);
    offset += 4 * t.tensor.size();
  }
  for (const auto& t : tensors)
    for (double v : t.tensor.values()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

std::vector<WeightEntry> decode_weights(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  Reader in(bytes, source);
  if (in.text(4, "magic") != std::string(kMagic, 4)) throw format_error(source + ": bad magic bytes (not a weight file)");
  const auto version = in.get<std::uint8_t>("version");
  if (version != kWeightFormatVersion)
    throw format_error(source + ": unsupported format version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>("tensor count");

  std::vector<WeightEntry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    WeightEntry e;
    const auto len = in.get<std::uint16_t>("name length");
    e.name = in.text(len, "name");
    const auto rank = in.get<std::uint8_t>("rank");
    if (rank == 0) throw format_error(source + ": tensor '" + e.name + "' has rank 0");
    for (std::uint8_t r = 0; r < rank; ++r) {
      const auto d = in.get<std::uint32_t>("dimension");
      if (d == 0) throw format_error(source + ": tensor '" + e.name + "' has a zero dimension");
      e.shape.push_back(d);
    }
    e.offset = in.get<std::uint64_t>("offset");
    entries.push_back(std::move(e));
  }

  const std::size_t payload_start = in.position();
  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  for (auto& e : entries) {
    const std::uint64_t bytes_needed = 4 * static_cast<std::uint64_t>(shape_size(e.shape));
    if (e.offset < payload_start || e.offset > bytes.size() || bytes.size() - e.offset < bytes_needed)
      throw format_error(source + ": payload of '" + e.name + "' lies outside the file");
    spans.emplace_back(e.offset, e.offset + bytes_needed);
    e.values.resize(shape_size(e.shape));
    for (std::size_t k = 0; k < e.values.size(); ++k) {
      std::uint32_t u = 0;
      for (std::size_t b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[e.offset + 4 * k + b]) << (8 * b);
      e.values[k] = std::bit_cast<float>(u);
    }
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i)
    if (spans[i].first < spans[i - 1].second) throw format_error(source + ": overlapping tensor payloads");
  return entries;
}

void save_weights(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  const auto bytes = encode_weights(tensors);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw data_error("failed writing " + path.string());
}

std::vector<WeightEntry> read_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weights(bytes, path.string());
}

void assign_weights(const std::vector<WeightEntry>& entries, const std::vector<NamedTensor>& targets,
                    const std::string& source) {
  std::map<std::string, const WeightEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (const auto& t : targets) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw format_error(source + ": missing tensor '" + t.name + "'");
    if (it->second->shape != t.tensor.shape())
      throw format_error(source + ": tensor '" + t.name + "' has shape " + shape_to_string(it->second->shape) +
                         ", model expects " + shape_to_string(t.tensor.shape()));
  }
  for (const auto& t : targets) {
    const auto& src = by_name[t.name]->values;
    Tensor dst = t.tensor;
    std::copy(src.begin(), src.end(), dst.values().begin());
  }
}

void load_weights(const std::filesystem::path& path, const std::vector<NamedTensor>& targets) {
  assign_weights(read_weights(path), targets, path.string());
}

void quantize_to_float(const std::vector<NamedTensor>& tensors) {
  for (const auto& t : tensors) {
    Tensor h = t.tensor;
    for (auto& v : h.values()) v = static_cast<double>(static_cast<float>(v));
  }
}

} // namespace tabdl
