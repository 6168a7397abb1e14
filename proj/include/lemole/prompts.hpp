#ifndef LEMOLE_PROMPTS_HPP
#define LEMOLE_PROMPTS_HPP

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lemole/matrix.hpp"

namespace lemole {

enum class PromptKind { Static, Dynamic };

struct PromptText {
    std::string text;
    PromptKind kind = PromptKind::Static;
};

/// Frozen text representation Z (tokens x embedding dim). Immutable once
/// produced; the trainer only ever reads it.
struct PromptEmbedding {
    Matrix matrix;
    PromptKind kind = PromptKind::Static;
    std::string provider_id;
    std::uint64_t prompt_hash = 0;
};

struct DatasetMeta {
    std::string name;
    std::string description;
    // channel name -> meaning
    std::vector<std::pair<std::string, std::string>> channels;
};

std::uint64_t fnv1a64(std::string_view text);
std::string hash_hex(std::uint64_t hash);

/// "Dataset: {name}. {description} Variables: ..." - deterministic, so the
/// embedding can be computed once per run.
PromptText render_static_prompt(const DatasetMeta& meta);

/// Compact per-window template over the lookback span; token count does not
/// depend on the concrete timestamps, which keeps L_D fixed.
PromptText render_dynamic_prompt(const std::vector<std::int64_t>& lookback_timestamps,
                                 std::int64_t freq_seconds);

/// Lowercased tokens split on whitespace and ASCII punctuation; punctuation
/// characters are kept as their own tokens.
std::vector<std::string> tokenize_prompt(std::string_view text);

/// Deterministic stand-in for a frozen LLM encoder: one unit-norm row per
/// token, drawn from a counter-based generator keyed by (seed, token hash).
Matrix hash_encoder(std::string_view text, std::size_t d_llm, std::uint64_t seed);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual PromptEmbedding embed(const PromptText& prompt) = 0;
    virtual std::string id() const = 0;
};

class HashProvider final : public EmbeddingProvider {
public:
    HashProvider(std::size_t d_llm, std::uint64_t seed) : d_llm_(d_llm), seed_(seed) {}
    PromptEmbedding embed(const PromptText& prompt) override;
    std::string id() const override;

private:
    std::size_t d_llm_;
    std::uint64_t seed_;
};

/// Embedding file pair: `<path>` is a JSON manifest mapping 16-hex-char
/// FNV-1a prompt hashes to {rows, cols, offset, byte_length} into the binary
/// blob next to it (little-endian float32, row-major).
struct EmbeddingFileEntry {
    std::string prompt_hash;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
    std::size_t byte_length = 0;
};

void write_embedding_file(const std::string& manifest_path,
                          const std::vector<std::pair<std::string, Matrix>>& prompt_to_matrix);

class FileProvider final : public EmbeddingProvider {
public:
    explicit FileProvider(const std::string& manifest_path);
    PromptEmbedding embed(const PromptText& prompt) override;
    std::string id() const override;

private:
    std::string manifest_path_;
    std::string blob_path_;
    std::unordered_map<std::string, EmbeddingFileEntry> entries_;
};

/// HTTP provider: POST {"text": ...} to the endpoint, expect
/// {"embedding": [[...], ...]}. Retries with doubling backoff starting at
/// backoff_ms; results are cached by prompt hash.
class RemoteProvider final : public EmbeddingProvider {
public:
    explicit RemoteProvider(const std::string& endpoint, int max_attempts = 3,
                            int backoff_ms = 100);
    PromptEmbedding embed(const PromptText& prompt) override;
    std::string id() const override;

private:
    std::string endpoint_;
    int max_attempts_;
    int backoff_ms_;
    std::mutex mutex_;
    std::unordered_map<std::uint64_t, Matrix> cache_;
};

/// Wraps any provider with a thread-safe memo keyed by prompt hash; the
/// trainer uses this so each distinct dynamic prompt is encoded once.
class MemoizingProvider final : public EmbeddingProvider {
public:
    explicit MemoizingProvider(std::shared_ptr<EmbeddingProvider> inner)
        : inner_(std::move(inner)) {}
    PromptEmbedding embed(const PromptText& prompt) override;
    std::string id() const override { return inner_->id(); }
    std::size_t cache_size() const;

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    mutable std::mutex mutex_;
    std::unordered_map<std::uint64_t, PromptEmbedding> cache_;
};

} // namespace lemole

#endif // LEMOLE_PROMPTS_HPP
