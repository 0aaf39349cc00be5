#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "constructa/error.hpp"

namespace constructa {

/// Fixed-dimension real vector with a cached Euclidean norm.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    /// Throws DataError "NonFiniteEmbedding".
    explicit EmbeddingVector(std::vector<double> values);

    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t dimension() const noexcept { return values_.size(); }
    double norm() const noexcept { return norm_; }
    /// Copy scaled to unit norm (zero vectors stay zero).
    EmbeddingVector normalized() const;

    bool operator==(const EmbeddingVector& o) const { return values_ == o.values_; }

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

/// dot(a, b) / (|a| |b|); 0 when either vector is zero.
/// Throws DataError "DimensionMismatch".
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Text -> unit-norm vector of fixed dimension.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    /// Throws DataError "EmptyText" when the text has no tokens.
    virtual EmbeddingVector embed(std::string_view text) const = 0;
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const;
};

/// Feature-hashed term frequencies: case-folded word unigrams plus character
/// trigrams of each space-padded word, bucketed with FNV-1a-64 (seeded) into
/// `dimension` bins, then L2-normalized.
class HashedNgramEmbedder final : public Embedder {
public:
    explicit HashedNgramEmbedder(std::size_t dimension = 256, std::uint64_t seed = 0x5eed5eed5eed5eedULL);
    std::size_t dimension() const override { return dimension_; }
    EmbeddingVector embed(std::string_view text) const override;

private:
    std::size_t dimension_;
    std::uint64_t basis_;
};

/// OpenAI-compatible `/v1/embeddings` client. Vectors are checked for the
/// configured dimension and finiteness, then normalized on ingest.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(std::string endpoint_url, std::string model, std::size_t dimension, std::string api_key,
                 int timeout_seconds = 60);
    std::size_t dimension() const override { return dimension_; }
    EmbeddingVector embed(std::string_view text) const override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const override;

private:
    std::string endpoint_url_;
    std::string model_;
    std::size_t dimension_;
    std::string api_key_;
    int timeout_seconds_;
};

struct TermEntry {
    std::string term;
    std::string definition;
    EmbeddingVector embedding;
};

struct KnowledgeChunk {
    std::string doc_id;
    std::size_t chunk_index = 0;
    std::string text;
    std::size_t token_count = 0;
    EmbeddingVector embedding;
};

/// Splits normalized text into runs of `chunk_tokens` tokens; embeddings unset.
/// Throws DataError "EmptyDocument".
std::vector<KnowledgeChunk> chunk_document(std::string_view doc_id, std::string_view text,
                                           std::size_t chunk_tokens = 500);

/// Local store: term definitions, embedded as f(definition).
class TermStore {
public:
    explicit TermStore(std::size_t dimension) : dimension_(dimension) {}
    std::size_t dimension() const noexcept { return dimension_; }
    const std::vector<TermEntry>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }

    void add(std::string term, std::string definition, const Embedder& embedder);
    /// Adds a pre-embedded entry (used on load). Checks dimension/norm.
    void add(TermEntry entry);

    /// Writes `<prefix>.manifest.jsonl` and `<prefix>.emb`.
    void save(const std::filesystem::path& prefix) const;
    static TermStore load(const std::filesystem::path& prefix);

private:
    std::size_t dimension_;
    std::vector<TermEntry> entries_;
};

/// Global store: chunked reference documents.
class ChunkStore {
public:
    explicit ChunkStore(std::size_t dimension) : dimension_(dimension) {}
    std::size_t dimension() const noexcept { return dimension_; }
    const std::vector<KnowledgeChunk>& chunks() const noexcept { return chunks_; }
    bool empty() const noexcept { return chunks_.empty(); }

    void add_document(std::string_view doc_id, std::string_view text, const Embedder& embedder,
                      std::size_t chunk_tokens = 500);
    void add(KnowledgeChunk chunk);

    void save(const std::filesystem::path& prefix) const;
    static ChunkStore load(const std::filesystem::path& prefix);

private:
    std::size_t dimension_;
    std::vector<KnowledgeChunk> chunks_;
};

/// Entry maximizing similarity to embed(query); earliest wins ties.
/// Throws DataError "EmptyStore".
const TermEntry& retrieve_local(const TermStore& store, const Embedder& embedder, std::string_view query);

struct RetrievedChunk {
    const KnowledgeChunk* chunk;
    double similarity;
};

/// The k most similar chunks, descending; ties by (doc_id, chunk_index).
/// Throws DataError "EmptyStore"; UsageError "InvalidK" for k < 1.
std::vector<RetrievedChunk> retrieve_global(const ChunkStore& store, const Embedder& embedder,
                                            std::string_view query, std::size_t k = 3);
std::vector<RetrievedChunk> retrieve_global(const ChunkStore& store, const EmbeddingVector& query,
                                            std::size_t k = 3);

/// Every regular file in `dir` (sorted by filename); doc_id is the filename.
std::vector<std::pair<std::string, std::string>> load_corpus_dir(const std::filesystem::path& dir);
/// Tab-separated `term<TAB>definition` lines; blank and '#' lines skipped.
std::vector<std::pair<std::string, std::string>> load_term_file(const std::filesystem::path& path);

}  // namespace constructa
