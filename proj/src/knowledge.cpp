#include "constructa/knowledge.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "constructa/util.hpp"
#include "http_util.hpp"
#include "httplib.h"
#include "json.hpp"

namespace constructa {

static_assert(std::endian::native == std::endian::little, "embedding files are written in host order");

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    double sq = 0.0;
    for (const double v : values_) {
        if (!std::isfinite(v)) throw DataError("NonFiniteEmbedding", "embedding has a non-finite component");
        sq += v * v;
    }
    norm_ = std::sqrt(sq);
}

EmbeddingVector EmbeddingVector::normalized() const {
    if (norm_ == 0.0) return *this;
    std::vector<double> v(values_);
    for (auto& x : v) x /= norm_;
    return EmbeddingVector(std::move(v));
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        throw DataError("DimensionMismatch", std::to_string(a.dimension()) + " vs " + std::to_string(b.dimension()));
    if (a.norm() == 0.0 || b.norm() == 0.0) return 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < a.dimension(); ++i) dot += a.values()[i] * b.values()[i];
    return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

std::vector<EmbeddingVector> Embedder::embed_batch(const std::vector<std::string>& texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

HashedNgramEmbedder::HashedNgramEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), basis_(fnv1a64(std::string_view(reinterpret_cast<const char*>(&seed), sizeof seed))) {
    if (dimension_ == 0) throw UsageError("InvalidDimension", "embedding dimension must be positive");
}

EmbeddingVector HashedNgramEmbedder::embed(std::string_view text) const {
    const auto tokens = tokenize(casefold(text));
    if (tokens.empty()) throw DataError("EmptyText", "cannot embed empty text");
    std::vector<double> v(dimension_, 0.0);
    auto bump = [&](std::string_view feature) { v[fnv1a64(feature, basis_) % dimension_] += 1.0; };
    for (const auto& tok : tokens) {
        bump("w:" + tok);
        const std::string padded = " " + tok + " ";
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) bump("c:" + padded.substr(i, 3));
    }
    return EmbeddingVector(std::move(v)).normalized();
}

HttpEmbedder::HttpEmbedder(std::string endpoint_url, std::string model, std::size_t dimension,
                           std::string api_key, int timeout_seconds)
    : endpoint_url_(std::move(endpoint_url)),
      model_(std::move(model)),
      dimension_(dimension),
      api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {}

EmbeddingVector HttpEmbedder::embed(std::string_view text) const {
    return embed_batch({std::string(text)}).front();
}

std::vector<EmbeddingVector> HttpEmbedder::embed_batch(const std::vector<std::string>& texts) const {
    for (const auto& t : texts)
        if (tokenize(t).empty()) throw DataError("EmptyText", "cannot embed empty text");
    const auto url = detail::split_url(endpoint_url_);
    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const nlohmann::json body{{"model", model_}, {"input", texts}};
    const auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) throw Error(ErrorClass::Gateway, "GatewayError", "embeddings request failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw Error(ErrorClass::Gateway, "HttpStatus", "embeddings endpoint returned " + std::to_string(res->status));
    std::vector<EmbeddingVector> out;
    try {
        const auto j = nlohmann::json::parse(res->body);
        const auto& data = j.at("data");
        if (data.size() != texts.size()) throw Error(ErrorClass::Gateway, "MalformedResponse", "wrong vector count");
        for (const auto& item : data) {
            auto values = item.at("embedding").get<std::vector<double>>();
            if (values.size() != dimension_)
                throw Error(ErrorClass::Gateway, "MalformedResponse", "embedding dimension " +
                                                                          std::to_string(values.size()));
            out.push_back(EmbeddingVector(std::move(values)).normalized());
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorClass::Gateway, "MalformedResponse", e.what());
    }
    return out;
}

std::vector<KnowledgeChunk> chunk_document(std::string_view doc_id, std::string_view text,
                                           std::size_t chunk_tokens) {
    if (chunk_tokens == 0) throw UsageError("InvalidChunkSize", "chunk_tokens must be >= 1");
    const auto tokens = tokenize(text);
    if (tokens.empty()) throw DataError("EmptyDocument", "document '" + std::string(doc_id) + "' is empty");
    std::vector<KnowledgeChunk> chunks;
    for (std::size_t start = 0; start < tokens.size(); start += chunk_tokens) {
        const auto end = std::min(tokens.size(), start + chunk_tokens);
        KnowledgeChunk c;
        c.doc_id = std::string(doc_id);
        c.chunk_index = chunks.size();
        c.text = join(std::vector<std::string>(tokens.begin() + static_cast<long>(start),
                                               tokens.begin() + static_cast<long>(end)),
                      " ");
        c.token_count = end - start;
        chunks.push_back(std::move(c));
    }
    return chunks;
}

namespace {

constexpr char kMagic[4] = {'C', 'E', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

void check_embedding(const EmbeddingVector& e, std::size_t dimension) {
    if (e.dimension() != dimension)
        throw DataError("DimensionMismatch", "expected " + std::to_string(dimension) + ", got " +
                                                 std::to_string(e.dimension()));
    if (std::abs(e.norm() - 1.0) > 1e-9) throw DataError("NotNormalized", "stored embeddings must be unit-norm");
}

void write_matrix(const std::filesystem::path& path, std::size_t dimension,
                  const std::vector<const EmbeddingVector*>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("WriteFailed", "cannot write " + path.string());
    const std::uint32_t version = kVersion, width = sizeof(double), dim = static_cast<std::uint32_t>(dimension);
    const std::uint64_t count = rows.size();
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&width), 4);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(&count), 8);
    for (const auto* r : rows)
        out.write(reinterpret_cast<const char*>(r->values().data()),
                  static_cast<std::streamsize>(dimension * sizeof(double)));
}

std::pair<std::size_t, std::vector<EmbeddingVector>> read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("MissingFile", "cannot read " + path.string());
    char magic[4];
    std::uint32_t version = 0, width = 0, dim = 0;
    std::uint64_t count = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&width), 4);
    in.read(reinterpret_cast<char*>(&dim), 4);
    in.read(reinterpret_cast<char*>(&count), 8);
    if (!in || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion || width != sizeof(double))
        throw DataError("CorruptStore", "bad embedding header in " + path.string());
    std::vector<EmbeddingVector> rows;
    rows.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::vector<double> v(dim);
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim * sizeof(double)));
        if (!in) throw DataError("CorruptStore", "truncated embedding matrix " + path.string());
        rows.emplace_back(std::move(v));
    }
    return {dim, std::move(rows)};
}

std::vector<nlohmann::json> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("MissingFile", "cannot read " + path.string());
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception&) {
            throw DataError("CorruptRecord", path.string() + ":" + std::to_string(n));
        }
    }
    return out;
}

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* suffix) {
    return prefix.string() + suffix;
}

}  // namespace

void TermStore::add(std::string term, std::string definition, const Embedder& embedder) {
    if (trim(term).empty()) throw DataError("EmptyTerm", "term must be non-empty");
    auto e = embedder.embed(definition);
    add(TermEntry{std::move(term), std::move(definition), std::move(e)});
}

void TermStore::add(TermEntry entry) {
    if (trim(entry.term).empty()) throw DataError("EmptyTerm", "term must be non-empty");
    check_embedding(entry.embedding, dimension_);
    entries_.push_back(std::move(entry));
}

void TermStore::save(const std::filesystem::path& prefix) const {
    std::ofstream out(with_suffix(prefix, ".manifest.jsonl"), std::ios::trunc);
    std::vector<const EmbeddingVector*> rows;
    for (const auto& e : entries_) {
        out << nlohmann::ordered_json{{"term", e.term}, {"definition", e.definition}}.dump() << '\n';
        rows.push_back(&e.embedding);
    }
    write_matrix(with_suffix(prefix, ".emb"), dimension_, rows);
}

TermStore TermStore::load(const std::filesystem::path& prefix) {
    const auto manifest = read_manifest(with_suffix(prefix, ".manifest.jsonl"));
    auto [dim, rows] = read_matrix(with_suffix(prefix, ".emb"));
    if (rows.size() != manifest.size()) throw DataError("CorruptStore", "manifest/matrix count mismatch");
    TermStore store(dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
        store.add(TermEntry{manifest[i].at("term").get<std::string>(),
                            manifest[i].at("definition").get<std::string>(), std::move(rows[i])});
    return store;
}

void ChunkStore::add_document(std::string_view doc_id, std::string_view text, const Embedder& embedder,
                              std::size_t chunk_tokens) {
    auto chunks = chunk_document(doc_id, text, chunk_tokens);
    std::vector<std::string> texts;
    for (const auto& c : chunks) texts.push_back(c.text);
    auto embeddings = embedder.embed_batch(texts);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        chunks[i].embedding = std::move(embeddings[i]);
        add(std::move(chunks[i]));
    }
}

void ChunkStore::add(KnowledgeChunk chunk) {
    if (chunk.token_count == 0) throw DataError("EmptyChunk", "chunk has no tokens");
    std::size_t expected = 0;
    for (const auto& c : chunks_)
        if (c.doc_id == chunk.doc_id) ++expected;
    if (chunk.chunk_index != expected)
        throw DataError("ChunkOrder", "chunk " + std::to_string(chunk.chunk_index) + " of '" + chunk.doc_id +
                                          "' is out of order");
    check_embedding(chunk.embedding, dimension_);
    chunks_.push_back(std::move(chunk));
}

void ChunkStore::save(const std::filesystem::path& prefix) const {
    std::ofstream out(with_suffix(prefix, ".manifest.jsonl"), std::ios::trunc);
    std::vector<const EmbeddingVector*> rows;
    for (const auto& c : chunks_) {
        out << nlohmann::ordered_json{{"doc_id", c.doc_id},
                                      {"chunk_index", c.chunk_index},
                                      {"token_count", c.token_count},
                                      {"text", c.text}}
                   .dump()
            << '\n';
        rows.push_back(&c.embedding);
    }
    write_matrix(with_suffix(prefix, ".emb"), dimension_, rows);
}

ChunkStore ChunkStore::load(const std::filesystem::path& prefix) {
    const auto manifest = read_manifest(with_suffix(prefix, ".manifest.jsonl"));
    auto [dim, rows] = read_matrix(with_suffix(prefix, ".emb"));
    if (rows.size() != manifest.size()) throw DataError("CorruptStore", "manifest/matrix count mismatch");
    ChunkStore store(dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        KnowledgeChunk c;
        c.doc_id = manifest[i].at("doc_id").get<std::string>();
        c.chunk_index = manifest[i].at("chunk_index").get<std::size_t>();
        c.token_count = manifest[i].at("token_count").get<std::size_t>();
        c.text = manifest[i].at("text").get<std::string>();
        c.embedding = std::move(rows[i]);
        store.add(std::move(c));
    }
    return store;
}

const TermEntry& retrieve_local(const TermStore& store, const Embedder& embedder, std::string_view query) {
    if (store.empty()) throw DataError("EmptyStore", "term store is empty");
    const auto q = embedder.embed(query);
    const TermEntry* best = nullptr;
    double best_sim = -2.0;
    for (const auto& e : store.entries()) {
        const double s = cosine_similarity(q, e.embedding);
        if (s > best_sim) {
            best_sim = s;
            best = &e;
        }
    }
    return *best;
}

std::vector<RetrievedChunk> retrieve_global(const ChunkStore& store, const EmbeddingVector& query,
                                            std::size_t k) {
    if (store.empty()) throw DataError("EmptyStore", "chunk store is empty");
    if (k < 1) throw UsageError("InvalidK", "k must be >= 1");
    std::vector<RetrievedChunk> hits;
    hits.reserve(store.chunks().size());
    for (const auto& c : store.chunks()) hits.push_back({&c, cosine_similarity(query, c.embedding)});
    const auto take = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<long>(take), hits.end(),
                      [](const RetrievedChunk& a, const RetrievedChunk& b) {
                          if (a.similarity != b.similarity) return a.similarity > b.similarity;
                          if (a.chunk->doc_id != b.chunk->doc_id) return a.chunk->doc_id < b.chunk->doc_id;
                          return a.chunk->chunk_index < b.chunk->chunk_index;
                      });
    hits.resize(take);
    return hits;
}

std::vector<RetrievedChunk> retrieve_global(const ChunkStore& store, const Embedder& embedder,
                                            std::string_view query, std::size_t k) {
    if (store.empty()) throw DataError("EmptyStore", "chunk store is empty");
    return retrieve_global(store, embedder.embed(query), k);
}

std::vector<std::pair<std::string, std::string>> load_corpus_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("MissingFile", "corpus dir " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, std::string>> docs;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        docs.emplace_back(f.filename().string(), ss.str());
    }
    return docs;
}

std::vector<std::pair<std::string, std::string>> load_term_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("MissingFile", "cannot read term file " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto tab = t.find('\t');
        if (tab == std::string_view::npos)
            throw DataError("CorruptRecord", path.string() + ":" + std::to_string(n) + ": expected term<TAB>definition");
        out.emplace_back(std::string(trim(t.substr(0, tab))), std::string(trim(t.substr(tab + 1))));
    }
    return out;
}

}  // namespace constructa
