#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pageguide/find_engine.hpp"
#include "pageguide/guide_engine.hpp"
#include "pageguide/hide_engine.hpp"
#include "pageguide/llm_gateway.hpp"

namespace pageguide::router {

enum class Handler { Find, Guide, Hide, ImageFind, PdfFind };

inline constexpr Handler kAllHandlers[] = {Handler::Find, Handler::Guide, Handler::Hide, Handler::ImageFind,
                                           Handler::PdfFind};

std::string_view to_string(Handler h) noexcept;
std::optional<Handler> parse_handler(std::string_view s) noexcept;

struct PageContext {
    std::string page_title;
    std::string content_type;
};

/// Title from the snapshot; content type "video", "article" or "page" from
/// the elements present.
PageContext page_context(const Snapshot& snapshot);

struct RouteDecision {
    Handler handler = Handler::Find;
    double confidence = 0.0;
    std::string reason;
    bool fallback_applied = false;

    bool operator==(const RouteDecision&) const = default;
};

inline constexpr std::string_view kFallbackReason = "router fallback";

std::vector<llm::ChatMessage> build_messages(std::string_view query, const PageContext& context);

/// Throws Error(ParseFailure) when no object with a known handler, a numeric
/// confidence and a string reason can be read. Confidence is clamped to [0,1].
RouteDecision parse_route_response(std::string_view raw);

/// Never throws on model text: unusable replies become the find fallback.
/// Gateway errors propagate. Throws Error(BadRequest) for an empty query.
RouteDecision classify(std::string_view query, const PageContext& context, llm::Gateway& gateway);

struct NotImplemented {
    Handler handler;
};

struct DispatchRequest {
    std::string query;
    std::vector<Snapshot> sequence;  // first entry is the current page
    std::vector<find::Exchange> history;
    IndexOptions options;
};

using DispatchResult =
    std::variant<find::GroundedAnswer, hide::HideProposal, std::shared_ptr<guide::GuideSession>, NotImplemented>;

/// Runs the handler the decision names. Guide starts a session over the
/// sequence and stages its first step.
DispatchResult dispatch(const RouteDecision& decision, const DispatchRequest& request, llm::Gateway& gateway);

nlohmann::json to_json(const RouteDecision& d);
nlohmann::json to_json(const DispatchResult& r);

}  // namespace pageguide::router
