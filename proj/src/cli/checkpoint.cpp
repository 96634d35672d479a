#include "kpj/cli/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kpj/core/errors.hpp"

namespace kpj::cli {

namespace {

constexpr std::array<char, 8> kMagic{'K', 'P', 'J', 'C', 'K', 'P', 'T', '\0'};

template <typename U>
void put(std::ostream& out, U v) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_vocab(std::ostream& out, const corpus::Vocabulary& v) {
  put<std::uint64_t>(out, v.hash());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
  for (const auto& t : v.tokens()) put_string(out, t);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename U>
  U get() {
    std::array<unsigned char, sizeof(U)> bytes;
    read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  corpus::Vocabulary get_vocab(const char* which) {
    const auto hash = get<std::uint64_t>();
    const auto n = get<std::uint32_t>();
    std::vector<std::string> tokens;
    tokens.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) tokens.push_back(get_string());
    auto v = corpus::Vocabulary::from_tokens(std::move(tokens));
    if (v.hash() != hash) throw FormatError(std::string("checkpoint ") + which + " vocabulary hash mismatch");
    return v;
  }

  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("checkpoint is truncated");
  }

 private:
  std::istream& in_;
};

}  // namespace

const StoredTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, ckpt.kind);
  put<std::uint64_t>(out, ckpt.step);
  put_string(out, ckpt.config);
  put_vocab(out, ckpt.encoder_vocab);
  put_vocab(out, ckpt.generator_vocab);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (ad::shape_size(t.shape) != t.values.size()) throw ContractError("tensor " + t.name + " has inconsistent size");
    put_string(out, t.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    for (double v : t.values) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw IoError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(in);
  std::array<char, 8> magic;
  r.read(magic.data(), magic.size());
  if (magic != kMagic) throw FormatError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.kind = r.get_string();
  c.step = r.get<std::uint64_t>();
  c.config = r.get_string();
  c.encoder_vocab = r.get_vocab("encoder");
  c.generator_vocab = r.get_vocab("generator");
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    t.name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 4) throw FormatError("tensor " + t.name + " has implausible rank " + std::to_string(rank));
    for (std::uint32_t d = 0; d < rank; ++d) t.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    t.values.resize(ad::shape_size(t.shape));
    for (auto& v : t.values) v = std::bit_cast<double>(r.get<std::uint64_t>());
    c.tensors.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ostringstream buf(std::ios::binary);
  write_checkpoint(ckpt, buf);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path);
  const std::string bytes = buf.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  return read_checkpoint(in);
}

void store_tensors(const ad::ParamStore& store, std::vector<StoredTensor>& out) {
  for (const auto& [name, t] : store.entries()) {
    out.push_back({name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  }
}

void restore_tensors(const Checkpoint& ckpt, ad::ParamStore& store) {
  for (const auto& [name, t] : store.entries()) {
    const StoredTensor* s = ckpt.find(name);
    if (!s) throw FormatError("checkpoint has no tensor " + name);
    if (s->shape != t.shape()) {
      throw FormatError("tensor " + name + " is " + ad::shape_string(s->shape) + " in the checkpoint but " +
                        ad::shape_string(t.shape()) + " in the model");
    }
    store.assign(name, s->values);
  }
}

void require_same_vocab(const corpus::Vocabulary& expected, const corpus::Vocabulary& actual,
                        const std::string& what) {
  if (expected.hash() != actual.hash()) {
    throw ConfigError(what + " vocabulary mismatch (hash " + std::to_string(expected.hash()) + " vs " +
                      std::to_string(actual.hash()) + ")");
  }
}

}  // namespace kpj::cli
