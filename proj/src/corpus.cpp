#include "activerank/corpus.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace activerank {

namespace {

using nlohmann::json;

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> bytes = {
      char(v & 0xffu), char((v >> 8) & 0xffu), char((v >> 16) & 0xffu),
      char((v >> 24) & 0xffu)};
  out.write(bytes.data(), 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) {
    throw Error(ErrorCode::parse,
                std::string("binary embeddings: truncated while reading ") +
                    what);
  }
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

std::vector<DenseHit> similarities(const CorpusIndex& index,
                                   const Eigen::Ref<const VectorXd>& query) {
  if (query.size() != index.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "query dimension " + std::to_string(query.size()) +
                    " does not match corpus dimension " +
                    std::to_string(index.dim()));
  }
  const VectorXd sims = index.vectors() * query;
  std::vector<DenseHit> hits(index.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    hits[i] = {i, sims[Eigen::Index(i)]};
  }
  return hits;
}

bool dense_before(const DenseHit& a, const DenseHit& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.index < b.index;
}

}  // namespace

EmbeddingFormat parse_embedding_format(std::string_view name) {
  if (name == "jsonl") return EmbeddingFormat::jsonl;
  if (name == "binary") return EmbeddingFormat::binary;
  throw Error(ErrorCode::invalid_argument,
              "unknown embedding format '" + std::string(name) + "'");
}

std::string_view to_string(EmbeddingFormat format) {
  return format == EmbeddingFormat::jsonl ? "jsonl" : "binary";
}

CorpusIndex::CorpusIndex(std::vector<std::string> ids, RowMatrixXd vectors,
                         bool normalized)
    : ids_(std::move(ids)), vectors_(std::move(vectors)),
      normalized_(normalized) {
  if (Eigen::Index(ids_.size()) != vectors_.rows()) {
    throw Error(ErrorCode::invalid_argument,
                "corpus: id count does not match vector rows");
  }
  lookup_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i].empty()) {
      throw Error(ErrorCode::invalid_argument,
                  "corpus: empty passage id at row " + std::to_string(i));
    }
    if (!lookup_.emplace(ids_[i], i).second) {
      throw Error(ErrorCode::duplicate_id, "duplicate id " + ids_[i]);
    }
    if (!vectors_.row(Eigen::Index(i)).allFinite()) {
      throw Error(ErrorCode::invalid_argument,
                  "non-finite embedding at id=" + ids_[i]);
    }
  }
}

std::optional<std::size_t> CorpusIndex::find(std::string_view id) const {
  auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

CorpusIndex read_embeddings_jsonl(std::istream& in) {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::parse,
                  "malformed record at " + where + ": " + e.what());
    }
    if (!record.is_object() || !record.contains("id") ||
        !record["id"].is_string() || !record.contains("vector") ||
        !record["vector"].is_array()) {
      throw Error(ErrorCode::parse,
                  "malformed record at " + where +
                      ": expected {\"id\": string, \"vector\": [numbers]}");
    }
    std::string id = record["id"].get<std::string>();
    std::vector<double> values;
    values.reserve(record["vector"].size());
    for (const auto& v : record["vector"]) {
      if (!v.is_number()) {
        throw Error(ErrorCode::parse,
                    "malformed record at " + where + ": non-numeric component");
      }
      values.push_back(v.get<double>());
    }
    if (values.empty()) {
      throw Error(ErrorCode::parse,
                  "malformed record at " + where + ": empty vector");
    }
    if (rows.empty()) {
      dim = values.size();
    } else if (values.size() != dim) {
      throw Error(ErrorCode::dimension_mismatch,
                  "dimension mismatch at id=" + id + " (expected " +
                      std::to_string(dim) + ", got " +
                      std::to_string(values.size()) + ")");
    }
    if (!seen.emplace(id, rows.size()).second) {
      throw Error(ErrorCode::duplicate_id,
                  "duplicate id " + id + " at " + where);
    }
    ids.push_back(std::move(id));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) {
    throw Error(ErrorCode::parse, "empty embeddings file");
  }
  RowMatrixXd vectors(Eigen::Index(rows.size()), Eigen::Index(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    vectors.row(Eigen::Index(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), Eigen::Index(dim));
  }
  return CorpusIndex(std::move(ids), std::move(vectors));
}

CorpusIndex read_embeddings_binary(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 0) throw Error(ErrorCode::parse, "empty embeddings file");
  if (!in || !std::equal(magic, magic + 4, kBinaryMagic)) {
    throw Error(ErrorCode::parse, "binary embeddings: bad magic");
  }
  const std::uint32_t dim = get_u32(in, "dim");
  const std::uint32_t count = get_u32(in, "count");
  if (dim == 0) throw Error(ErrorCode::parse, "binary embeddings: dim is 0");
  if (count == 0) throw Error(ErrorCode::parse, "empty embeddings file");

  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(in, "id length");
    std::string id(len, '\0');
    in.read(id.data(), len);
    if (!in) throw Error(ErrorCode::parse, "binary embeddings: truncated id");
    ids.push_back(std::move(id));
  }
  RowMatrixXd vectors(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  std::vector<unsigned char> buf(std::size_t(dim) * 4);
  for (std::uint32_t r = 0; r < count; ++r) {
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (!in) {
      throw Error(ErrorCode::parse,
                  "binary embeddings: truncated vector for id=" + ids[r]);
    }
    for (std::uint32_t c = 0; c < dim; ++c) {
      const unsigned char* b = buf.data() + 4 * c;
      const std::uint32_t bits = std::uint32_t(b[0]) |
                                 (std::uint32_t(b[1]) << 8) |
                                 (std::uint32_t(b[2]) << 16) |
                                 (std::uint32_t(b[3]) << 24);
      vectors(r, c) = double(std::bit_cast<float>(bits));
    }
  }
  return CorpusIndex(std::move(ids), std::move(vectors));
}

CorpusIndex load_embeddings(const std::filesystem::path& path,
                            EmbeddingFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io, "cannot open " + path.string());
  }
  return format == EmbeddingFormat::jsonl ? read_embeddings_jsonl(in)
                                          : read_embeddings_binary(in);
}

void write_embeddings_jsonl(std::ostream& out, const CorpusIndex& index) {
  for (std::size_t i = 0; i < index.size(); ++i) {
    json record;
    record["id"] = index.id(i);
    const auto v = index.embedding(i);
    record["vector"] = std::vector<double>(v.data(), v.data() + v.size());
    out << record.dump() << '\n';
  }
}

void write_embeddings_binary(std::ostream& out, const CorpusIndex& index) {
  out.write(kBinaryMagic, 4);
  put_u32(out, std::uint32_t(index.dim()));
  put_u32(out, std::uint32_t(index.size()));
  for (const auto& id : index.ids()) {
    put_u32(out, std::uint32_t(id.size()));
    out.write(id.data(), std::streamsize(id.size()));
  }
  for (std::size_t r = 0; r < index.size(); ++r) {
    for (Eigen::Index c = 0; c < index.dim(); ++c) {
      put_u32(out, std::bit_cast<std::uint32_t>(
                       float(index.vectors()(Eigen::Index(r), c))));
    }
  }
}

void write_embeddings(const std::filesystem::path& path,
                      const CorpusIndex& index, EmbeddingFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  if (format == EmbeddingFormat::jsonl) {
    write_embeddings_jsonl(out, index);
  } else {
    write_embeddings_binary(out, index);
  }
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

VectorXd normalized(const Eigen::Ref<const VectorXd>& v,
                    std::string_view label) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::zero_vector,
                "zero vector at id=" + std::string(label));
  }
  return v / norm;
}

CorpusIndex normalize(const CorpusIndex& index) {
  RowMatrixXd out(index.vectors().rows(), index.vectors().cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    out.row(Eigen::Index(i)) =
        normalized(index.embedding(i), index.id(i)).transpose();
  }
  return CorpusIndex(index.ids(), std::move(out), true);
}

std::vector<DenseHit> dense_top_m(const CorpusIndex& index,
                                  const Eigen::Ref<const VectorXd>& query,
                                  std::size_t m) {
  if (m == 0) {
    throw Error(ErrorCode::invalid_argument, "dense_top_m: m must be >= 1");
  }
  if (m > index.size()) {
    throw Error(ErrorCode::invalid_argument,
                "dense_top_m: m=" + std::to_string(m) + " exceeds corpus size " +
                    std::to_string(index.size()));
  }
  auto hits = similarities(index, query);
  std::partial_sort(hits.begin(), hits.begin() + std::ptrdiff_t(m), hits.end(),
                    dense_before);
  hits.resize(m);
  return hits;
}

std::vector<std::size_t> dense_order(const CorpusIndex& index,
                                     const Eigen::Ref<const VectorXd>& query) {
  auto hits = similarities(index, query);
  std::sort(hits.begin(), hits.end(), dense_before);
  std::vector<std::size_t> order(hits.size());
  std::transform(hits.begin(), hits.end(), order.begin(),
                 [](const DenseHit& h) { return h.index; });
  return order;
}

}  // namespace activerank
