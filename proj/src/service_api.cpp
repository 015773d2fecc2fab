#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "pageguide/service_api.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <thread>

#include <httplib.h>

#include "pageguide/intent_router.hpp"
#include "pageguide/text.hpp"

namespace pageguide::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string snake_case(std::string_view camel) {
    std::string out;
    for (char c : camel) {
        if (std::isupper(static_cast<unsigned char>(c))) {
            if (!out.empty()) out += '_';
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else {
            out += c;
        }
    }
    return out;
}

int status_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingFile: return 404;
        case ErrorCode::MalformedMeta: return 400;
        case ErrorCode::UnparseableHtml: return 400;
        case ErrorCode::IoError: return 500;
        case ErrorCode::EmptySequence: return 400;
        case ErrorCode::UnknownElementId: return 400;
        case ErrorCode::NoSpanMatch: return 422;
        case ErrorCode::ReplayMiss: return 502;
        case ErrorCode::Transport: return 502;
        case ErrorCode::Upstream: return 502;
        case ErrorCode::MissingCredential: return 502;
        case ErrorCode::ParseFailure: return 502;
        case ErrorCode::InvalidState: return 409;
        case ErrorCode::MalformedStep: return 502;
        case ErrorCode::SequenceExhausted: return 409;
        case ErrorCode::StepLimit: return 409;
        case ErrorCode::MalformedHideResponse: return 502;
        case ErrorCode::UnknownCandidate: return 400;
        case ErrorCode::AlreadyApplied: return 409;
        case ErrorCode::StaleIndex: return 409;
        case ErrorCode::UnknownMutation: return 400;
        case ErrorCode::InvalidCount: return 400;
        case ErrorCode::EmptyDataset: return 400;
        case ErrorCode::SchemaViolation: return 400;
        case ErrorCode::UnknownSnapshot: return 404;
        case ErrorCode::UnknownSession: return 404;
        case ErrorCode::Busy: return 409;
        case ErrorCode::TooLarge: return 413;
        case ErrorCode::BadRequest: return 400;
        case ErrorCode::Unauthorized: return 401;
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Usage: return 400;
    }
    return 500;
}

Response error_response(const Error& e) {
    const auto m = map_error(e.code());
    json err = {{"code", m.code}, {"message", e.message()}};
    if (!e.detail().is_null()) err["detail"] = e.detail();
    return {m.status, {{"error", std::move(err)}}};
}

std::string req_string(const json& body, const char* key) {
    if (!body.contains(key) || !body[key].is_string()) {
        throw Error(ErrorCode::BadRequest, std::string("\"") + key + "\" must be a string");
    }
    return body[key].get<std::string>();
}

bool constant_time_equal(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    unsigned char diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
    return diff == 0;
}

std::string random_id() { return guide::random_session_id(); }

}  // namespace

ErrorMapping map_error(ErrorCode code) { return {status_of(code), snake_case(to_string(code))}; }

std::string generate_secret() { return random_id(); }

Snapshot snapshot_from_json(const json& body) {
    if (!body.is_object()) throw Error(ErrorCode::BadRequest, "snapshot body must be an object");
    Snapshot s;
    s.html = req_string(body, "html");
    s.url = req_string(body, "url");
    s.title = body.contains("title") && body["title"].is_string() ? body["title"].get<std::string>() : "";
    if (body.contains("captured_at")) s.captured_at = req_string(body, "captured_at");
    if (body.contains("layout") && !body["layout"].is_null()) s.layout = layout_from_json(body["layout"]);
    validate(s);
    return s;
}

Service::Service(std::shared_ptr<llm::Gateway> gateway, ServiceConfig config)
    : gateway_(std::move(gateway)), config_(std::move(config)) {}

std::string Service::add_snapshot(Snapshot snapshot) {
    auto e = std::make_shared<SnapshotEntry>();
    e->snapshot = std::move(snapshot);
    const std::string id = random_id();
    std::unique_lock lock(snapshots_mutex_);
    snapshots_.emplace(id, std::move(e));
    return id;
}

std::optional<Snapshot> Service::snapshot(const std::string& id) const {
    std::shared_lock lock(snapshots_mutex_);
    auto it = snapshots_.find(id);
    if (it == snapshots_.end()) return std::nullopt;
    return it->second->snapshot;
}

std::shared_ptr<Service::SnapshotEntry> Service::entry(const json& body, const char* field) const {
    const std::string id = req_string(body, field);
    std::shared_lock lock(snapshots_mutex_);
    auto it = snapshots_.find(id);
    if (it == snapshots_.end()) throw Error(ErrorCode::UnknownSnapshot, "unknown snapshot " + id, {{"snapshot_id", id}});
    return it->second;
}

const ElementIndex& Service::index_of(SnapshotEntry& e) {
    std::call_once(e.index_once, [&] { e.index = build_index(e.snapshot, config_.index); });
    return e.index;
}

std::shared_ptr<Service::SessionEntry> Service::session(const std::string& id) {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "unknown session " + id, {{"session_id", id}});
    return it->second;
}

std::size_t Service::sweep() {
    const auto now = config_.clock();
    std::lock_guard lock(sessions_mutex_);
    std::size_t dropped = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
        if (session_lock.owns_lock() && now - it->second->last_used > config_.session_ttl) {
            session_lock.unlock();
            it = sessions_.erase(it);
            ++dropped;
        } else {
            ++it;
        }
    }
    return dropped;
}

std::size_t Service::session_count() const {
    std::lock_guard lock(sessions_mutex_);
    return sessions_.size();
}

Response Service::handle(std::string_view method, std::string_view path, std::string_view body,
                         const std::map<std::string, std::string>& headers) {
    try {
        if (!config_.secret.empty()) {
            const std::string wanted = text::to_lower_ascii(kSecretHeader);
            const std::string* given = nullptr;
            for (const auto& [k, v] : headers) {
                if (text::to_lower_ascii(k) == wanted) given = &v;
            }
            if (!given || !constant_time_equal(*given, config_.secret)) {
                throw Error(ErrorCode::Unauthorized, "missing or wrong shared secret");
            }
        }
        if (body.size() > config_.max_body) {
            throw Error(ErrorCode::TooLarge, "body exceeds " + std::to_string(config_.max_body) + " bytes",
                        {{"limit", config_.max_body}});
        }
        json parsed = json::object();
        if (!text::trim(body).empty()) {
            parsed = json::parse(body, nullptr, false);
            if (parsed.is_discarded() || !parsed.is_object()) throw Error(ErrorCode::BadRequest, "body must be a JSON object");
        }
        sweep();
        return dispatch(method, path, parsed);
    } catch (const Error& e) {
        return error_response(e);
    } catch (const json::exception& e) {
        return error_response(Error(ErrorCode::BadRequest, e.what()));
    }
}

Response Service::dispatch(std::string_view method, std::string_view path, const json& body) {
    if (method == "GET" && path == "/v1/health") return {200, {{"status", "ok"}}};
    if (method == "POST") {
        if (path == "/v1/snapshot") return post_snapshot(body);
        if (path == "/v1/route") return post_route(body);
        if (path == "/v1/find") return post_find(body);
        if (path == "/v1/hide/propose") return post_hide_propose(body);
        if (path == "/v1/hide/apply") return post_hide_apply(body);
        if (path == "/v1/guide/start") return guide_start(body);
    }
    constexpr std::string_view kGuidePrefix = "/v1/guide/";
    if (path.substr(0, kGuidePrefix.size()) == kGuidePrefix) {
        const std::string_view rest = path.substr(kGuidePrefix.size());
        const auto slash = rest.find('/');
        const std::string sid(rest.substr(0, slash));
        const std::string_view action = slash == std::string_view::npos ? std::string_view() : rest.substr(slash + 1);
        if (!sid.empty() && method == "GET" && action.empty()) return guide_action(sid, "state", body);
        if (!sid.empty() && method == "POST" && (action == "next" || action == "confirm" || action == "stop")) {
            return guide_action(sid, action, body);
        }
    }
    throw Error(ErrorCode::NotFound, "no route for " + std::string(method) + " " + std::string(path));
}

Response Service::post_snapshot(const json& body) {
    const std::string id = add_snapshot(snapshot_from_json(body));
    auto e = entry({{"snapshot_id", id}});
    return {200, {{"snapshot_id", id}, {"dropped_layout_entries", e->snapshot.dropped_layout_entries}}};
}

Response Service::post_route(const json& body) {
    auto e = entry(body);
    const std::string query = req_string(body, "query");
    const auto decision = router::classify(query, router::page_context(e->snapshot), *gateway_);
    return {200, router::to_json(decision)};
}

Response Service::post_find(const json& body) {
    auto e = entry(body);
    const std::string query = req_string(body, "query");
    std::vector<find::Exchange> history;
    if (body.contains("history")) {
        if (!body["history"].is_array()) throw Error(ErrorCode::BadRequest, "history must be an array");
        for (const auto& turn : body["history"]) history.push_back({req_string(turn, "query"), req_string(turn, "answer")});
    }
    find::FindOptions options;
    options.index = config_.index;
    const auto a = find::answer(query, index_of(*e), history, *gateway_, options);
    return {200, find::to_json(a)};
}

Response Service::post_hide_propose(const json& body) {
    auto e = entry(body);
    const std::string request = req_string(body, "request");
    auto proposal = hide::propose(request, index_of(*e), *gateway_, config_.index);
    json out = hide::to_json(proposal);
    std::lock_guard lock(e->hide_mutex);
    e->proposal = std::move(proposal);
    e->applied = false;
    return {200, std::move(out)};
}

Response Service::post_hide_apply(const json& body) {
    auto e = entry(body);
    if (!body.contains("confirmed_ids") || !body["confirmed_ids"].is_array()) {
        throw Error(ErrorCode::BadRequest, "\"confirmed_ids\" must be an array");
    }
    std::set<int> confirmed;
    for (const auto& v : body["confirmed_ids"]) {
        if (!v.is_number_integer()) throw Error(ErrorCode::BadRequest, "confirmed ids must be integers");
        confirmed.insert(v.get<int>());
    }
    std::lock_guard lock(e->hide_mutex);
    if (!e->proposal) throw Error(ErrorCode::InvalidState, "no hide proposal for this snapshot");
    if (e->applied) throw Error(ErrorCode::AlreadyApplied, "the proposal for this snapshot was already applied");
    const std::set<int> proposed = e->proposal->ids();
    for (int id : confirmed) {
        if (!proposed.count(id)) {
            throw Error(ErrorCode::UnknownCandidate, "element " + std::to_string(id) + " is not in the proposal",
                        {{"element_id", id}});
        }
    }
    std::set<int> unchecked;
    for (int id : proposed) {
        if (!confirmed.count(id)) unchecked.insert(id);
    }
    auto decision = hide::review(*e->proposal, unchecked);
    auto [mutated, record] = hide::apply(decision, e->snapshot, index_of(*e));
    e->applied = true;
    json directives = json::array();
    for (const auto& m : record.entries) {
        directives.push_back({{"element_id", m.element_id}, {"node_path", m.node_path.str()}, {"set_style", "display:none"}});
    }
    const std::string mutated_id = add_snapshot(std::move(mutated));
    return {200,
            {{"directives", std::move(directives)},
             {"mutated_snapshot_id", mutated_id},
             {"mutation_record", hide::to_json(record)}}};
}

Response Service::guide_start(const json& body) {
    const std::string query = req_string(body, "query");
    if (text::trim(query).empty()) throw Error(ErrorCode::BadRequest, "query must not be empty");
    std::vector<Snapshot> sequence;
    if (body.contains("snapshot_ids")) {
        if (!body["snapshot_ids"].is_array()) throw Error(ErrorCode::BadRequest, "snapshot_ids must be an array");
        for (const auto& id : body["snapshot_ids"]) sequence.push_back(entry({{"snapshot_id", id}})->snapshot);
    } else {
        sequence.push_back(entry(body)->snapshot);
    }
    auto s = std::make_shared<SessionEntry>();
    s->session = std::make_unique<guide::GuideSession>(query, std::move(sequence), config_.index);
    s->last_used = config_.clock();
    const std::string sid = s->session->id();
    const std::string state(guide::to_string(s->session->state()));
    {
        std::lock_guard lock(sessions_mutex_);
        sessions_.emplace(sid, std::move(s));
    }
    return {200, {{"session_id", sid}, {"state", state}}};
}

Response Service::guide_action(const std::string& sid, std::string_view action, const json& body) {
    auto s = session(sid);
    std::unique_lock lock(s->mutex, std::try_to_lock);
    if (!lock.owns_lock()) throw Error(ErrorCode::Busy, "session " + sid + " is handling another request");
    s->last_used = config_.clock();
    guide::GuideSession& g = *s->session;
    json out = {{"session_id", sid}};
    if (action == "next") {
        out["step"] = guide::to_json(g.next_step(*gateway_));
        out["step_card"] = g.step_card();
    } else if (action == "confirm") {
        std::optional<Snapshot> fresh;
        if (body.contains("snapshot_id")) fresh = entry(body)->snapshot;
        out["report"] = guide::to_json(g.confirm_step(std::move(fresh)));
        out["index_ref"] = g.index().snapshot_ref;
    } else if (action == "stop") {
        g.stop();
        out["history_length"] = g.history().size();
    } else {
        out["session"] = g.to_json();
    }
    out["state"] = std::string(guide::to_string(g.state()));
    return {200, std::move(out)};
}

void Service::serve(int port, const std::optional<fs::path>& handshake) {
    httplib::Server server;
    server.set_payload_max_length(config_.max_body * 2 + 1024);
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> headers;
        for (const auto& [k, v] : req.headers) headers.emplace(k, v);
        const Response r = handle(req.method, req.path, req.body, headers);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server.Get(R"(/.*)", handler);
    server.Post(R"(/.*)", handler);

    const int bound = port == 0 ? server.bind_to_any_port("127.0.0.1") : (server.bind_to_port("127.0.0.1", port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind 127.0.0.1:" + std::to_string(port));
    if (handshake) {
        const json hs = {{"port", bound}, {"secret", config_.secret}};
        {
            std::ofstream out(*handshake, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorCode::IoError, "cannot write handshake file " + handshake->string());
            out << hs.dump() << '\n';
        }
        std::error_code ec;
        fs::permissions(*handshake, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace, ec);
    }
    {
        std::lock_guard lock(server_mutex_);
        server_ = &server;
        bound_port_ = bound;
    }
    server.listen_after_bind();
    std::lock_guard lock(server_mutex_);
    server_ = nullptr;
    bound_port_ = 0;
}

void Service::stop() {
    std::lock_guard lock(server_mutex_);
    if (server_) server_->stop();
}

bool Service::wait_until_listening(std::chrono::milliseconds timeout) const {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        if (bound_port_.load() > 0) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return false;
}

}  // namespace pageguide::service
