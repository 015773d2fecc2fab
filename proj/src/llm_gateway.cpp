#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "pageguide/llm_gateway.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "pageguide/error.hpp"
#include "pageguide/text.hpp"

namespace pageguide::llm {

using nlohmann::json;
namespace fs = std::filesystem;

std::string request_key(const ChatRequest& request) {
    std::string material = request.model;
    for (const auto& m : request.messages) {
        material += '\x1F';
        material += m.role;
        material += '\x1F';
        material += m.content;
    }
    return text::sha256_hex(material);
}

json to_json(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", request.model},
            {"messages", std::move(messages)},
            {"temperature", request.temperature},
            {"max_output", request.max_output}};
}

ChatRequest request_from_json(const json& j) {
    ChatRequest r;
    r.model = j.at("model").get<std::string>();
    for (const auto& m : j.at("messages")) {
        r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    r.temperature = j.value("temperature", 0.0);
    r.max_output = j.value("max_output", 4096);
    return r;
}

std::string_view to_string(StoreMode mode) noexcept {
    switch (mode) {
        case StoreMode::Record: return "record";
        case StoreMode::Replay: return "replay";
        case StoreMode::Passthrough: return "passthrough";
    }
    return "replay";
}

std::optional<StoreMode> parse_store_mode(std::string_view s) noexcept {
    if (s == "record") return StoreMode::Record;
    if (s == "replay") return StoreMode::Replay;
    if (s == "passthrough") return StoreMode::Passthrough;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// TranscriptStore

TranscriptStore::TranscriptStore(StoreMode mode, std::optional<fs::path> file)
    : mode_(mode), file_(std::move(file)) {}

std::shared_ptr<TranscriptStore> TranscriptStore::open(const fs::path& file, StoreMode mode) {
    auto store = std::make_shared<TranscriptStore>(mode, file);
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        if (mode == StoreMode::Replay) {
            throw Error(ErrorCode::MissingFile, "transcript not found: " + file.string());
        }
        return store;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            Entry entry;
            entry.request = request_from_json(j.at("request"));
            const auto& r = j.at("response");
            entry.response.text = r.at("text").get<std::string>();
            entry.response.model = r.value("model", entry.request.model);
            entry.response.latency_ms = r.value("latency_ms", std::int64_t{0});
            const std::string key = j.at("key").get<std::string>();
            if (key != request_key(entry.request)) {
                throw Error(ErrorCode::SchemaViolation, "key does not match request content");
            }
            store->entries_.emplace(key, std::move(entry));
        } catch (const Error& e) {
            throw Error(ErrorCode::SchemaViolation,
                        file.filename().string() + " line " + std::to_string(line_no) + ": " + e.message(),
                        {{"line", line_no}});
        } catch (const std::exception& e) {
            throw Error(ErrorCode::SchemaViolation,
                        file.filename().string() + " line " + std::to_string(line_no) + ": " + e.what(),
                        {{"line", line_no}});
        }
    }
    return store;
}

std::optional<ChatResponse> TranscriptStore::lookup(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    ChatResponse r = it->second.response;
    r.source = ResponseSource::Replay;
    return r;
}

bool TranscriptStore::record(const ChatRequest& request, const ChatResponse& response) {
    std::lock_guard write_lock(write_mutex_);
    const std::string key = request_key(request);
    {
        std::unique_lock lock(mutex_);
        if (entries_.count(key)) return false;
        entries_.emplace(key, Entry{request, response});
    }
    if (file_) {
        const json line = {{"key", key},
                           {"request", to_json(request)},
                           {"response",
                            {{"text", response.text},
                             {"model", response.model},
                             {"latency_ms", response.latency_ms}}}};
        std::ofstream out(*file_, std::ios::binary | std::ios::app);
        if (!out) throw Error(ErrorCode::IoError, "cannot append to " + file_->string());
        out << line.dump() << '\n';
    }
    return true;
}

std::size_t TranscriptStore::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

std::vector<std::string> TranscriptStore::keys() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

std::string TranscriptStore::file_digest() const {
    if (!file_) return {};
    std::ifstream in(*file_, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return text::sha256_hex(ss.str());
}

// ---------------------------------------------------------------------------
// HttpTransport

HttpReply HttpTransport::post(const std::string& url,
                              const std::vector<std::pair<std::string, std::string>>& headers,
                              const std::string& body, std::chrono::milliseconds timeout) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::Transport, "invalid url: " + url);
    const auto path_begin = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_begin);
    const std::string path = path_begin == std::string::npos ? "/" : url.substr(path_begin);

    httplib::Client client(origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) throw Error(ErrorCode::Transport, "request to " + origin + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(GatewayConfig config, std::shared_ptr<TranscriptStore> store,
                 std::shared_ptr<Transport> transport)
    : config_(std::move(config)), store_(std::move(store)), transport_(std::move(transport)) {
    if (!store_) store_ = std::make_shared<TranscriptStore>(StoreMode::Passthrough);
    if (!transport_) transport_ = std::make_shared<HttpTransport>();
}

ChatRequest Gateway::make_request(std::vector<ChatMessage> messages) const {
    ChatRequest r;
    r.model = config_.model;
    r.messages = std::move(messages);
    r.temperature = config_.temperature;
    r.max_output = config_.max_output;
    return r;
}

ChatResponse Gateway::complete(const ChatRequest& request) {
    const std::string key = request_key(request);
    switch (store_->mode()) {
        case StoreMode::Replay: {
            if (auto hit = store_->lookup(key)) return *hit;
            std::string preview = request.messages.empty() ? std::string() : request.messages.back().content;
            throw Error(ErrorCode::ReplayMiss, "no recorded response for request " + key.substr(0, 12),
                        {{"key", key}, {"last_message", text::clip(preview, 200)}});
        }
        case StoreMode::Record: {
            if (auto hit = store_->lookup(key)) return *hit;
            ChatResponse live = call_live(request);
            store_->record(request, live);
            return live;
        }
        case StoreMode::Passthrough:
            return call_live(request);
    }
    throw Error(ErrorCode::Transport, "unreachable store mode");
}

ChatResponse Gateway::call_live(const ChatRequest& request) {
    if (!config_.api_key || config_.api_key->empty()) {
        throw Error(ErrorCode::MissingCredential, std::string("set ") + kApiKeyEnv + " for live model calls");
    }
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    const json body = {{"model", request.model},
                       {"messages", std::move(messages)},
                       {"temperature", request.temperature},
                       {"max_tokens", request.max_output}};
    std::string base = config_.base_url;
    while (!base.empty() && base.back() == '/') base.pop_back();
    const std::vector<std::pair<std::string, std::string>> headers = {
        {"Authorization", "Bearer " + *config_.api_key},
        {"Accept", "application/json"},
    };

    HttpReply reply;
    const auto started = config_.clock();
    for (int attempt = 0;; ++attempt) {
        try {
            reply = transport_->post(base + "/chat/completions", headers, body.dump(), config_.timeout);
            break;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Transport || attempt >= config_.retries) {
                throw Error(e.code(), e.message() + " (after " + std::to_string(attempt + 1) + " attempts)");
            }
            const auto wait = static_cast<std::size_t>(attempt) < config_.backoff.size()
                                  ? config_.backoff[static_cast<std::size_t>(attempt)]
                                  : (config_.backoff.empty() ? std::chrono::milliseconds(0) : config_.backoff.back());
            std::this_thread::sleep_for(wait);
        }
    }
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        config_.clock() - started);

    if (reply.status < 200 || reply.status >= 300) {
        throw Error(ErrorCode::Upstream,
                    "HTTP " + std::to_string(reply.status) + ": " + text::clip(reply.body, 300),
                    {{"status", reply.status}});
    }
    ChatResponse response;
    try {
        const json j = json::parse(reply.body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        response.text = content.is_string() ? content.get<std::string>() : content.dump();
        response.model = j.value("model", request.model);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::Upstream, std::string("unexpected response body: ") + e.what(),
                    {{"status", reply.status}});
    }
    response.latency_ms = elapsed.count();
    response.source = ResponseSource::Live;
    return response;
}

}  // namespace pageguide::llm
