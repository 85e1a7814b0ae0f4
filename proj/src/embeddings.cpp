#include "moralscope/embeddings.hpp"

#include "moralscope/text.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace moralscope::embed {

static_assert(std::endian::native == std::endian::little, "EMB1 I/O assumes a little-endian host");

void StaticTable::add(const std::string& word, std::span<const float> vec) {
  if (vec.size() != dim_) throw EmbeddingFormatError("vector for '" + word + "' has wrong dimension");
  if (index_.count(word)) throw EmbeddingFormatError("duplicate word '" + word + "'");
  index_.emplace(word, words_.size());
  words_.push_back(word);
  data_.insert(data_.end(), vec.begin(), vec.end());
}

std::optional<std::span<const float>> StaticTable::find(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return row(it->second);
}

const ContextualRecord* ContextualSet::find(const std::string& id) const {
  auto it = index.find(id);
  return it == index.end() ? nullptr : &records[it->second];
}

namespace {

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  template <class T>
  T read() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string read_string() {
    const auto n = read<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void read_floats(std::vector<float>& out, std::size_t n) {
    if (n > remaining() / sizeof(float)) throw EmbeddingFormatError("body shorter than declared sizes");
    const std::size_t old = out.size();
    out.resize(old + n);
    std::memcpy(out.data() + old, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
    for (std::size_t i = old; i < out.size(); ++i) {
      if (!std::isfinite(out[i])) throw EmbeddingFormatError("non-finite value in embedding payload");
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw EmbeddingFormatError("body shorter than declared sizes");
  }
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_header(std::ofstream& out, EmbeddingKind kind, std::uint32_t dim, std::uint32_t count) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
  put<std::uint32_t>(out, dim);
  put<std::uint32_t>(out, count);
}

}  // namespace

EmbeddingFile parse_embedding_bytes(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw EmbeddingFormatError("bad magic (expected EMB1)");
  Reader r(bytes.subspan(4));
  EmbeddingFile f;
  f.version = r.read<std::uint32_t>();
  if (f.version != kVersion) throw EmbeddingFormatError("unsupported EMB1 version " + std::to_string(f.version));
  const auto kind = r.read<std::uint8_t>();
  if (kind > 1) throw EmbeddingFormatError("unknown embedding kind " + std::to_string(kind));
  f.kind = static_cast<EmbeddingKind>(kind);
  f.dim = r.read<std::uint32_t>();
  if (f.dim == 0) throw EmbeddingFormatError("dim must be positive");
  const auto count = r.read<std::uint32_t>();
  if (f.kind == EmbeddingKind::kStatic) {
    f.table = StaticTable(f.dim);
    std::vector<float> buf;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::string word = r.read_string();
      buf.clear();
      r.read_floats(buf, f.dim);
      f.table.add(word, buf);
    }
  } else {
    f.contextual.dim = f.dim;
    for (std::uint32_t i = 0; i < count; ++i) {
      ContextualRecord rec;
      rec.instance_id = r.read_string();
      rec.token_count = r.read<std::uint32_t>();
      r.read_floats(rec.data, static_cast<std::size_t>(rec.token_count) * f.dim);
      if (f.contextual.index.count(rec.instance_id)) throw EmbeddingFormatError("duplicate instance '" + rec.instance_id + "'");
      f.contextual.index.emplace(rec.instance_id, f.contextual.records.size());
      f.contextual.records.push_back(std::move(rec));
    }
  }
  if (r.remaining() != 0) throw EmbeddingFormatError("trailing bytes after declared records");
  return f;
}

EmbeddingFile read_embedding_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmbeddingFormatError("cannot read '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_embedding_bytes(bytes);
}

void write_static(const std::filesystem::path& path, const StaticTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EmbeddingFormatError("cannot write '" + path.string() + "'");
  put_header(out, EmbeddingKind::kStatic, table.dim(), static_cast<std::uint32_t>(table.size()));
  for (std::size_t i = 0; i < table.size(); ++i) {
    put_string(out, table.words()[i]);
    const auto row = table.row(i);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size_bytes()));
  }
}

void write_contextual(const std::filesystem::path& path, std::uint32_t dim, const std::vector<ContextualRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EmbeddingFormatError("cannot write '" + path.string() + "'");
  put_header(out, EmbeddingKind::kContextual, dim, static_cast<std::uint32_t>(records.size()));
  for (const auto& rec : records) {
    if (rec.data.size() != static_cast<std::size_t>(rec.token_count) * dim) {
      throw EmbeddingFormatError("record '" + rec.instance_id + "' payload does not match token_count x dim");
    }
    put_string(out, rec.instance_id);
    put<std::uint32_t>(out, rec.token_count);
    out.write(reinterpret_cast<const char*>(rec.data.data()), static_cast<std::streamsize>(rec.data.size() * sizeof(float)));
  }
}

// ---- provider ----------------------------------------------------------------

EmbeddingProvider EmbeddingProvider::random_fixed(std::uint32_t dim, std::uint64_t seed) {
  if (dim == 0) throw num::InvalidArgument("embedding dim must be positive");
  EmbeddingProvider p;
  p.mode_ = ProviderMode::kRandomFixed;
  p.dim_ = dim;
  p.seed_ = seed;
  return p;
}

EmbeddingProvider EmbeddingProvider::from_static(StaticTable table) {
  EmbeddingProvider p;
  p.mode_ = ProviderMode::kStaticTable;
  p.dim_ = table.dim();
  p.table_ = std::move(table);
  return p;
}

EmbeddingProvider EmbeddingProvider::from_contextual(ContextualSet set) {
  EmbeddingProvider p;
  p.mode_ = ProviderMode::kContextualFile;
  p.dim_ = set.dim;
  p.contextual_ = std::move(set);
  return p;
}

EmbeddingProvider EmbeddingProvider::from_file(const std::filesystem::path& path) {
  EmbeddingFile f = read_embedding_file(path);
  if (f.kind == EmbeddingKind::kStatic) return from_static(std::move(f.table));
  return from_contextual(std::move(f.contextual));
}

std::vector<double> EmbeddingProvider::token_vector(const std::string& token) const {
  std::vector<double> v(dim_, 0.0);
  const std::string key = text::lowercase(token);
  if (mode_ == ProviderMode::kRandomFixed) {
    num::Rng rng(seed_ ^ num::fnv1a64(key));
    for (auto& x : v) x = rng.normal();
  } else if (mode_ == ProviderMode::kStaticTable) {
    if (auto row = table_.find(key)) {
      for (std::size_t i = 0; i < dim_; ++i) v[i] = (*row)[i];
    }
  } else {
    throw num::InvalidArgument("token_vector is not available for contextual embeddings");
  }
  return v;
}

num::Tensor EmbeddingProvider::embed(const std::string& instance_id, const std::vector<std::string>& tokens) const {
  const auto t = static_cast<Eigen::Index>(tokens.size());
  num::Tensor out(t, dim_);
  if (mode_ == ProviderMode::kContextualFile) {
    const ContextualRecord* rec = contextual_.find(instance_id);
    if (!rec) throw num::InvalidArgument("no contextual embeddings for instance '" + instance_id + "'");
    if (rec->token_count != tokens.size()) {
      throw num::InvalidArgument("instance '" + instance_id + "': embeddings have " + std::to_string(rec->token_count) +
                                 " tokens, instance has " + std::to_string(tokens.size()));
    }
    for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = rec->data[static_cast<std::size_t>(i)];
    return out;
  }
  for (Eigen::Index i = 0; i < t; ++i) {
    const auto v = token_vector(tokens[static_cast<std::size_t>(i)]);
    for (std::uint32_t d = 0; d < dim_; ++d) out(i, d) = v[d];
  }
  return out;
}

}  // namespace moralscope::embed
