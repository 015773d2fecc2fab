#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "pageguide/error.hpp"
#include "pageguide/find_engine.hpp"
#include "pageguide/guide_engine.hpp"
#include "pageguide/hide_engine.hpp"
#include "pageguide/llm_gateway.hpp"

namespace httplib {
class Server;
}

namespace pageguide::service {

inline constexpr std::string_view kSecretHeader = "X-PageGuide-Secret";

/// HTTP status and wire code for an engine error. Total over ErrorCode.
struct ErrorMapping {
    int status;
    std::string code;
};
ErrorMapping map_error(ErrorCode code);

struct ServiceConfig {
    std::size_t max_body = 8u * 1024u * 1024u;
    /// Required in the secret header when non-empty.
    std::string secret;
    std::chrono::seconds session_ttl{1800};
    IndexOptions index;
    std::function<std::chrono::steady_clock::time_point()> clock = [] { return std::chrono::steady_clock::now(); };
};

struct Response {
    int status = 200;
    nlohmann::json body;
};

/// Request handling independent of the HTTP server, so tests can drive it
/// in-process. All methods are thread-safe.
class Service {
public:
    Service(std::shared_ptr<llm::Gateway> gateway, ServiceConfig config);

    /// Header names are matched case-insensitively.
    Response handle(std::string_view method, std::string_view path, std::string_view body,
                    const std::map<std::string, std::string>& headers = {});

    /// Stores a validated snapshot and returns its new id.
    std::string add_snapshot(Snapshot snapshot);
    std::optional<Snapshot> snapshot(const std::string& id) const;

    /// Drops guide sessions idle for longer than the TTL. Returns how many.
    std::size_t sweep();
    std::size_t session_count() const;

    /// Binds 127.0.0.1 (port 0 picks a free one), writes the handshake file
    /// {port, secret} when a path is given, and blocks until stop().
    void serve(int port, const std::optional<std::filesystem::path>& handshake = std::nullopt);
    void stop();
    /// Port the running server is bound to, 0 before serve() binds.
    int bound_port() const noexcept { return bound_port_.load(); }
    bool wait_until_listening(std::chrono::milliseconds timeout) const;

    const ServiceConfig& config() const noexcept { return config_; }

private:
    struct SnapshotEntry {
        Snapshot snapshot;
        std::once_flag index_once;
        ElementIndex index;
        std::mutex hide_mutex;
        std::optional<hide::HideProposal> proposal;
        bool applied = false;
    };
    struct SessionEntry {
        std::mutex mutex;
        std::unique_ptr<guide::GuideSession> session;
        std::chrono::steady_clock::time_point last_used;
    };

    Response dispatch(std::string_view method, std::string_view path, const nlohmann::json& body);
    std::shared_ptr<SnapshotEntry> entry(const nlohmann::json& body, const char* field = "snapshot_id") const;
    const ElementIndex& index_of(SnapshotEntry& e);
    std::shared_ptr<SessionEntry> session(const std::string& id);

    Response post_snapshot(const nlohmann::json& body);
    Response post_route(const nlohmann::json& body);
    Response post_find(const nlohmann::json& body);
    Response post_hide_propose(const nlohmann::json& body);
    Response post_hide_apply(const nlohmann::json& body);
    Response guide_start(const nlohmann::json& body);
    Response guide_action(const std::string& sid, std::string_view action, const nlohmann::json& body);

    std::shared_ptr<llm::Gateway> gateway_;
    ServiceConfig config_;
    mutable std::shared_mutex snapshots_mutex_;
    std::map<std::string, std::shared_ptr<SnapshotEntry>> snapshots_;
    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<SessionEntry>> sessions_;
    std::atomic<int> bound_port_{0};
    std::mutex server_mutex_;
    httplib::Server* server_ = nullptr;  // set while serving
};

/// 32 random hex characters for the shared secret.
std::string generate_secret();

/// Parses a snapshot upload body {html, url, title, captured_at?, layout?}.
Snapshot snapshot_from_json(const nlohmann::json& body);

}  // namespace pageguide::service
