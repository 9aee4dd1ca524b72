#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "activerank/types.hpp"

namespace activerank {

enum class EmbeddingFormat { jsonl, binary };

EmbeddingFormat parse_embedding_format(std::string_view name);
std::string_view to_string(EmbeddingFormat format);

/// Immutable, insertion-ordered set of passage embeddings.
///
/// Row i of vectors() belongs to id(i). Iteration order is the order the
/// passages were supplied in, and every tie-break in the engine falls back
/// to that order.
class CorpusIndex {
 public:
  CorpusIndex() = default;

  /// Validates ids (non-empty, unique) and vectors (finite). Throws Error.
  CorpusIndex(std::vector<std::string> ids, RowMatrixXd vectors,
              bool normalized = false);

  Eigen::Index dim() const { return vectors_.cols(); }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool normalized() const { return normalized_; }

  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }
  const RowMatrixXd& vectors() const { return vectors_; }

  Eigen::Map<const VectorXd> embedding(std::size_t i) const {
    return Eigen::Map<const VectorXd>(vectors_.row(Eigen::Index(i)).data(),
                                      vectors_.cols());
  }

  std::optional<std::size_t> find(std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  RowMatrixXd vectors_;
  std::unordered_map<std::string, std::size_t> lookup_;
  bool normalized_ = false;
};

struct QueryRecord {
  std::string query_id;
  std::string text;
  VectorXd embedding;
};

CorpusIndex read_embeddings_jsonl(std::istream& in);
CorpusIndex read_embeddings_binary(std::istream& in);
CorpusIndex load_embeddings(const std::filesystem::path& path,
                            EmbeddingFormat format);

void write_embeddings_jsonl(std::ostream& out, const CorpusIndex& index);
void write_embeddings_binary(std::ostream& out, const CorpusIndex& index);
void write_embeddings(const std::filesystem::path& path,
                      const CorpusIndex& index, EmbeddingFormat format);

// Binary layout: magic "ARE1", dim and count as little-endian u32, then
// count length-prefixed (u32) UTF-8 ids, then count*dim row-major f32.
inline constexpr char kBinaryMagic[4] = {'A', 'R', 'E', '1'};

/// Unit-normalizes a single vector; `label` names it in the zero-norm error.
VectorXd normalized(const Eigen::Ref<const VectorXd>& v,
                    std::string_view label);

CorpusIndex normalize(const CorpusIndex& index);

struct DenseHit {
  std::size_t index;
  double similarity;
};

/// Top-m passages by dot product with `query` (cosine when both sides are
/// unit length). Ties resolve to the earlier passage.
std::vector<DenseHit> dense_top_m(const CorpusIndex& index,
                                  const Eigen::Ref<const VectorXd>& query,
                                  std::size_t m);

/// Full dense ordering of the corpus, same ordering rule as dense_top_m.
std::vector<std::size_t> dense_order(const CorpusIndex& index,
                                     const Eigen::Ref<const VectorXd>& query);

}  // namespace activerank
