#include "lemole/prompts.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lemole/data.hpp"
#include "lemole/errors.hpp"

namespace lemole {

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string hash_hex(std::uint64_t hash) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[hash & 0xF];
        hash >>= 4;
    }
    return out;
}

PromptText render_static_prompt(const DatasetMeta& meta) {
    if (meta.description.empty()) fail(ErrorCode::EmptyText, "dataset description is empty");
    std::ostringstream out;
    out << "Dataset: " << meta.name << ". " << meta.description;
    if (!meta.description.empty() && meta.description.back() != '.') out << ".";
    out << " Variables:";
    for (std::size_t i = 0; i < meta.channels.size(); ++i) {
        out << " " << meta.channels[i].first;
        if (!meta.channels[i].second.empty()) out << " (" << meta.channels[i].second << ")";
        out << (i + 1 == meta.channels.size() ? "." : ",");
    }
    return {out.str(), PromptKind::Static};
}

PromptText render_dynamic_prompt(const std::vector<std::int64_t>& lookback_timestamps,
                                 std::int64_t freq_seconds) {
    if (lookback_timestamps.empty()) fail(ErrorCode::EmptyTimestamps, "dynamic prompt needs timestamps");
    const std::int64_t start = lookback_timestamps.front();
    const std::int64_t end = lookback_timestamps.back();
    std::ostringstream out;
    out << "The input series spans " << format_timestamp(start) << " to " << format_timestamp(end)
        << ", sampled every " << freq_seconds << " seconds; forecast begins "
        << format_timestamp(end + freq_seconds) << ".";
    return {out.str(), PromptKind::Dynamic};
}

std::vector<std::string> tokenize_prompt(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    for (unsigned char ch : text) {
        if (std::isspace(ch)) {
            flush();
        } else if (std::ispunct(ch)) {
            flush();
            tokens.emplace_back(1, static_cast<char>(ch));
        } else {
            current.push_back(static_cast<char>(std::tolower(ch)));
        }
    }
    flush();
    return tokens;
}

Matrix hash_encoder(std::string_view text, std::size_t d_llm, std::uint64_t seed) {
    if (d_llm == 0) fail(ErrorCode::InvalidArgument, "d_llm must be >= 1");
    const auto tokens = tokenize_prompt(text);
    if (tokens.empty()) fail(ErrorCode::EmptyText, "no tokens in prompt text");
    Matrix out(tokens.size(), d_llm);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        // Counter-based stream keyed by (seed, token hash): platform-fixed.
        std::uint64_t state = seed ^ (fnv1a64(tokens[t]) * 0x9e3779b97f4a7c15ULL);
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < d_llm; ++j) {
            const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
            const double v = 2.0 * u - 1.0;
            out(t, j) = v;
            norm_sq += v * v;
        }
        const double inv_norm = 1.0 / std::sqrt(norm_sq);
        for (std::size_t j = 0; j < d_llm; ++j) out(t, j) *= inv_norm;
    }
    return out;
}

PromptEmbedding HashProvider::embed(const PromptText& prompt) {
    PromptEmbedding emb;
    emb.matrix = hash_encoder(prompt.text, d_llm_, seed_);
    emb.kind = prompt.kind;
    emb.provider_id = id();
    emb.prompt_hash = fnv1a64(prompt.text);
    return emb;
}

std::string HashProvider::id() const {
    return "hash:d" + std::to_string(d_llm_) + ":s" + std::to_string(seed_);
}

namespace {

std::string blob_path_for(const std::string& manifest_path, const std::string& blob_name) {
    const auto slash = manifest_path.find_last_of('/');
    if (slash == std::string::npos) return blob_name;
    return manifest_path.substr(0, slash + 1) + blob_name;
}

void append_f32_le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    out.push_back(static_cast<char>(bits & 0xFF));
    out.push_back(static_cast<char>((bits >> 8) & 0xFF));
    out.push_back(static_cast<char>((bits >> 16) & 0xFF));
    out.push_back(static_cast<char>((bits >> 24) & 0xFF));
}

float read_f32_le(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace

void write_embedding_file(const std::string& manifest_path,
                          const std::vector<std::pair<std::string, Matrix>>& prompt_to_matrix) {
    nlohmann::json entries = nlohmann::json::object();
    std::string blob;
    for (const auto& [text, matrix] : prompt_to_matrix) {
        EmbeddingFileEntry entry;
        entry.prompt_hash = hash_hex(fnv1a64(text));
        entry.rows = matrix.rows();
        entry.cols = matrix.cols();
        entry.offset = blob.size();
        entry.byte_length = matrix.size() * 4;
        for (double v : matrix.storage()) append_f32_le(blob, static_cast<float>(v));
        entries[entry.prompt_hash] = {{"rows", entry.rows},
                                      {"cols", entry.cols},
                                      {"offset", entry.offset},
                                      {"byte_length", entry.byte_length}};
    }
    const auto slash = manifest_path.find_last_of('/');
    const std::string base =
        slash == std::string::npos ? manifest_path : manifest_path.substr(slash + 1);
    const std::string blob_name = base + ".bin";

    nlohmann::json manifest = {{"version", 1},
                               {"dtype", "float32"},
                               {"blob", blob_name},
                               {"entries", entries}};
    {
        std::ofstream out(manifest_path);
        if (!out) fail(ErrorCode::ProviderUnavailable, "cannot write " + manifest_path);
        out << manifest.dump(2) << "\n";
    }
    std::ofstream bout(blob_path_for(manifest_path, blob_name), std::ios::binary);
    if (!bout) fail(ErrorCode::ProviderUnavailable, "cannot write embedding blob");
    bout.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

FileProvider::FileProvider(const std::string& manifest_path) : manifest_path_(manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) fail(ErrorCode::ProviderUnavailable, "cannot open manifest " + manifest_path);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedResponse, "manifest parse error: " + std::string(e.what()));
    }
    if (!manifest.contains("entries") || !manifest.contains("blob"))
        fail(ErrorCode::MalformedResponse, "manifest missing 'entries' or 'blob'");
    blob_path_ = blob_path_for(manifest_path, manifest["blob"].get<std::string>());
    for (const auto& [key, value] : manifest["entries"].items()) {
        EmbeddingFileEntry entry;
        entry.prompt_hash = key;
        entry.rows = value.at("rows").get<std::size_t>();
        entry.cols = value.at("cols").get<std::size_t>();
        entry.offset = value.at("offset").get<std::size_t>();
        entry.byte_length = value.at("byte_length").get<std::size_t>();
        if (entry.rows == 0 || entry.cols == 0)
            fail(ErrorCode::EmbeddingShapeInvalid, "entry " + key + " has empty shape");
        if (entry.byte_length != entry.rows * entry.cols * 4)
            fail(ErrorCode::HashMismatch,
                 "entry " + key + " byte_length disagrees with rows*cols*4");
        entries_[key] = entry;
    }
}

PromptEmbedding FileProvider::embed(const PromptText& prompt) {
    const std::uint64_t hash = fnv1a64(prompt.text);
    const auto it = entries_.find(hash_hex(hash));
    if (it == entries_.end())
        fail(ErrorCode::CacheMiss, "no embedding for prompt hash " + hash_hex(hash));
    const EmbeddingFileEntry& entry = it->second;

    std::ifstream blob(blob_path_, std::ios::binary);
    if (!blob) fail(ErrorCode::ProviderUnavailable, "cannot open blob " + blob_path_);
    std::vector<unsigned char> bytes(entry.byte_length);
    blob.seekg(static_cast<std::streamoff>(entry.offset));
    blob.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(entry.byte_length));
    if (blob.gcount() != static_cast<std::streamsize>(entry.byte_length))
        fail(ErrorCode::MalformedResponse, "blob truncated for hash " + entry.prompt_hash);

    PromptEmbedding emb;
    emb.matrix = Matrix(entry.rows, entry.cols);
    for (std::size_t i = 0; i < entry.rows * entry.cols; ++i)
        emb.matrix.storage()[i] = static_cast<double>(read_f32_le(bytes.data() + i * 4));
    if (!all_finite(emb.matrix))
        fail(ErrorCode::EmbeddingShapeInvalid, "non-finite values in stored embedding");
    emb.kind = prompt.kind;
    emb.provider_id = id();
    emb.prompt_hash = hash;
    return emb;
}

std::string FileProvider::id() const { return "file:" + manifest_path_; }

RemoteProvider::RemoteProvider(const std::string& endpoint, int max_attempts, int backoff_ms)
    : endpoint_(endpoint), max_attempts_(max_attempts), backoff_ms_(backoff_ms) {
    if (max_attempts_ < 1) fail(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
}

PromptEmbedding RemoteProvider::embed(const PromptText& prompt) {
    const std::uint64_t hash = fnv1a64(prompt.text);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto it = cache_.find(hash);
        if (it != cache_.end()) {
            PromptEmbedding emb;
            emb.matrix = it->second;
            emb.kind = prompt.kind;
            emb.provider_id = id();
            emb.prompt_hash = hash;
            return emb;
        }
    }

    // Split "http://host:port/path" into client base and request path.
    std::string base = endpoint_;
    std::string path = "/";
    const auto scheme = base.find("://");
    const auto path_start = base.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start != std::string::npos) {
        path = base.substr(path_start);
        base = base.substr(0, path_start);
    }

    const nlohmann::json body = {{"text", prompt.text}};
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < max_attempts_; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms_ << (attempt - 1)));
        httplib::Client client(base);
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(30, 0);
        auto res = client.Post(path, body.dump(), "application/json");
        if (!res) {
            last_error = "connection failed";
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::MalformedResponse, "response is not JSON: " + std::string(e.what()));
        }
        if (!parsed.contains("embedding") || !parsed["embedding"].is_array() ||
            parsed["embedding"].empty())
            fail(ErrorCode::MalformedResponse, "response lacks a non-empty 'embedding' array");
        const auto& rows = parsed["embedding"];
        const std::size_t cols = rows[0].is_array() ? rows[0].size() : 0;
        if (cols == 0) fail(ErrorCode::MalformedResponse, "embedding rows must be non-empty arrays");
        Matrix matrix(rows.size(), cols);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (!rows[r].is_array() || rows[r].size() != cols)
                fail(ErrorCode::MalformedResponse, "ragged embedding rows");
            for (std::size_t c = 0; c < cols; ++c) {
                if (!rows[r][c].is_number())
                    fail(ErrorCode::MalformedResponse, "non-numeric embedding entry");
                matrix(r, c) = rows[r][c].get<double>();
            }
        }
        if (!all_finite(matrix))
            fail(ErrorCode::MalformedResponse, "non-finite values in embedding");
        {
            std::lock_guard<std::mutex> lock(mutex_);
            cache_[hash] = matrix;
        }
        PromptEmbedding emb;
        emb.matrix = std::move(matrix);
        emb.kind = prompt.kind;
        emb.provider_id = id();
        emb.prompt_hash = hash;
        return emb;
    }
    fail(ErrorCode::ProviderUnavailable, "after " + std::to_string(max_attempts_) +
                                             " attempts to " + endpoint_ + ": " + last_error);
}

std::string RemoteProvider::id() const { return "remote:" + endpoint_; }

PromptEmbedding MemoizingProvider::embed(const PromptText& prompt) {
    const std::uint64_t hash = fnv1a64(prompt.text);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto it = cache_.find(hash);
        if (it != cache_.end()) return it->second;
    }
    PromptEmbedding emb = inner_->embed(prompt);
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.emplace(hash, std::move(emb)).first->second;
}

std::size_t MemoizingProvider::cache_size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.size();
}

} // namespace lemole
