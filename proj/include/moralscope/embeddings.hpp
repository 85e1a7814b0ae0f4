#pragma once

#include "moralscope/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace moralscope::embed {

// EMB1 layout, all integers little-endian:
//   "EMB1" | u32 version | u8 kind | u32 dim | u32 count
//   kind 0: count x (u32 byte length, utf-8 word, dim x f32)
//   kind 1: count x (u32 byte length, utf-8 instance id, u32 token_count,
//                    token_count x dim x f32 row-major)
inline constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kVersion = 1;

enum class EmbeddingKind : std::uint8_t { kStatic = 0, kContextual = 1 };

class EmbeddingFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StaticTable {
 public:
  StaticTable() = default;
  explicit StaticTable(std::uint32_t dim) : dim_(dim) {}

  void add(const std::string& word, std::span<const float> vec);
  std::optional<std::span<const float>> find(const std::string& word) const;
  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct ContextualRecord {
  std::string instance_id;
  std::uint32_t token_count = 0;
  std::vector<float> data;  // token_count x dim
};

struct ContextualSet {
  std::uint32_t dim = 0;
  std::vector<ContextualRecord> records;
  std::unordered_map<std::string, std::size_t> index;

  const ContextualRecord* find(const std::string& id) const;
};

struct EmbeddingFile {
  std::uint32_t version = kVersion;
  EmbeddingKind kind = EmbeddingKind::kStatic;
  std::uint32_t dim = 0;
  StaticTable table;        // kind 0
  ContextualSet contextual;  // kind 1
};

EmbeddingFile read_embedding_file(const std::filesystem::path& path);
EmbeddingFile parse_embedding_bytes(std::span<const unsigned char> bytes);
void write_static(const std::filesystem::path& path, const StaticTable& table);
void write_contextual(const std::filesystem::path& path, std::uint32_t dim, const std::vector<ContextualRecord>& records);

enum class ProviderMode { kContextualFile, kStaticTable, kRandomFixed };

/// Per-token embedding matrices (T x dim) for corpus instances.
class EmbeddingProvider {
 public:
  static EmbeddingProvider random_fixed(std::uint32_t dim, std::uint64_t seed);
  static EmbeddingProvider from_file(const std::filesystem::path& path);
  static EmbeddingProvider from_static(StaticTable table);
  static EmbeddingProvider from_contextual(ContextualSet set);

  ProviderMode mode() const { return mode_; }
  std::uint32_t dim() const { return dim_; }

  num::Tensor embed(const std::string& instance_id, const std::vector<std::string>& tokens) const;
  std::vector<double> token_vector(const std::string& token) const;

 private:
  ProviderMode mode_ = ProviderMode::kRandomFixed;
  std::uint32_t dim_ = 0;
  std::uint64_t seed_ = 0;
  StaticTable table_;
  ContextualSet contextual_;
};

}  // namespace moralscope::embed
