#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

// Single chokepoint for model calls: chat-completions client plus a
// record/replay transcript store keyed by request content hash.
namespace pageguide::llm {

inline constexpr const char* kDefaultModel = "google/gemini-3-flash-preview";
inline constexpr const char* kDefaultBaseUrl = "https://openrouter.ai/api/v1";
inline constexpr const char* kApiKeyEnv = "PAGEGUIDE_API_KEY";

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_output = 4096;

    bool operator==(const ChatRequest&) const = default;
};

/// SHA-256 hex over model and each (role, content) in order, joined with
/// 0x1F. Temperature and max_output do not affect the key.
std::string request_key(const ChatRequest& request);

enum class ResponseSource { Live, Replay };

struct ChatResponse {
    std::string text;
    std::string model;
    std::int64_t latency_ms = 0;
    ResponseSource source = ResponseSource::Live;
};

nlohmann::json to_json(const ChatRequest& request);
ChatRequest request_from_json(const nlohmann::json& j);

enum class StoreMode { Record, Replay, Passthrough };

std::string_view to_string(StoreMode mode) noexcept;
std::optional<StoreMode> parse_store_mode(std::string_view s) noexcept;

/// Append-only JSON Lines fixture file: one {key, request, response} per
/// line. Reads are concurrent; record-mode writes are serialized.
class TranscriptStore {
public:
    explicit TranscriptStore(StoreMode mode, std::optional<std::filesystem::path> file = std::nullopt);

    /// Opens `file`, loading entries when it exists. Throws
    /// Error(SchemaViolation) naming the first malformed line.
    static std::shared_ptr<TranscriptStore> open(const std::filesystem::path& file, StoreMode mode);

    StoreMode mode() const noexcept { return mode_; }
    std::optional<ChatResponse> lookup(const std::string& key) const;
    /// Returns false (and writes nothing) when the key is already present.
    bool record(const ChatRequest& request, const ChatResponse& response);
    std::size_t size() const;
    /// Keys in sorted order.
    std::vector<std::string> keys() const;
    /// SHA-256 of the backing file contents, empty when there is none.
    std::string file_digest() const;
    const std::optional<std::filesystem::path>& file() const noexcept { return file_; }

private:
    struct Entry {
        ChatRequest request;
        ChatResponse response;
    };

    StoreMode mode_;
    std::optional<std::filesystem::path> file_;
    mutable std::shared_mutex mutex_;
    std::mutex write_mutex_;
    std::map<std::string, Entry> entries_;
};

struct HttpReply {
    int status = 0;
    std::string body;
};

/// Outbound HTTP. Implementations throw Error(Transport) on network failure.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpReply post(const std::string& url,
                           const std::vector<std::pair<std::string, std::string>>& headers,
                           const std::string& body, std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport (http and https).
class HttpTransport final : public Transport {
public:
    HttpReply post(const std::string& url,
                   const std::vector<std::pair<std::string, std::string>>& headers,
                   const std::string& body, std::chrono::milliseconds timeout) override;
};

struct GatewayConfig {
    std::string base_url = kDefaultBaseUrl;
    std::string model = kDefaultModel;
    std::optional<std::string> api_key;
    double temperature = 0.0;
    int max_output = 4096;
    std::chrono::milliseconds timeout{60000};
    int retries = 2;
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(1000),
                                                   std::chrono::milliseconds(4000)};
    /// Source of latency timestamps; swapped in fixture generation.
    std::function<std::chrono::steady_clock::time_point()> clock = [] { return std::chrono::steady_clock::now(); };
};

class Gateway {
public:
    Gateway(GatewayConfig config, std::shared_ptr<TranscriptStore> store,
            std::shared_ptr<Transport> transport = nullptr);

    /// Replay: stored response or Error(ReplayMiss). Record: stored response
    /// when present, else live call persisted. Passthrough: live only.
    ChatResponse complete(const ChatRequest& request);

    /// Request with the configured model and sampling settings.
    ChatRequest make_request(std::vector<ChatMessage> messages) const;

    const GatewayConfig& config() const noexcept { return config_; }
    const std::shared_ptr<TranscriptStore>& store() const noexcept { return store_; }

private:
    ChatResponse call_live(const ChatRequest& request);

    GatewayConfig config_;
    std::shared_ptr<TranscriptStore> store_;
    std::shared_ptr<Transport> transport_;
};

}  // namespace pageguide::llm
