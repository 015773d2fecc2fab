#include "pageguide/intent_router.hpp"

#include <algorithm>
#include <cmath>

#include "pageguide/error.hpp"
#include "pageguide/lenient_json.hpp"
#include "pageguide/prompts.hpp"
#include "pageguide/text.hpp"

namespace pageguide::router {

using nlohmann::json;

std::string_view to_string(Handler h) noexcept {
    switch (h) {
        case Handler::Find: return "find";
        case Handler::Guide: return "guide";
        case Handler::Hide: return "hide";
        case Handler::ImageFind: return "image_find";
        case Handler::PdfFind: return "pdf_find";
    }
    return "find";
}

std::optional<Handler> parse_handler(std::string_view s) noexcept {
    for (Handler h : kAllHandlers) {
        if (to_string(h) == s) return h;
    }
    return std::nullopt;
}

PageContext page_context(const Snapshot& snapshot) {
    PageContext ctx;
    ctx.page_title = snapshot.title;
    bool video = false;
    bool article = false;
    const html::Document doc = html::Document::parse(snapshot.html);
    html::walk(doc.root(), [&](const html::Node& n) {
        video = video || n.is_element("video");
        article = article || n.is_element("article");
    });
    ctx.content_type = video ? "video" : article ? "article" : "page";
    return ctx;
}

std::vector<llm::ChatMessage> build_messages(std::string_view query, const PageContext& context) {
    std::string user = "Query: \"";
    user += query;
    user += "\"\n\nPage title: " + context.page_title;
    user += "\nContent type: " + context.content_type;
    return {{"system", std::string(prompts::kRouter)}, {"user", std::move(user)}};
}

RouteDecision parse_route_response(std::string_view raw) {
    auto parsed = extract_json_object(raw);
    if (!parsed) throw Error(ErrorCode::ParseFailure, "no JSON object in router reply");
    const json& j = *parsed;
    if (!j.contains("handler") || !j["handler"].is_string()) {
        throw Error(ErrorCode::ParseFailure, "handler must be a string");
    }
    const auto handler = parse_handler(j["handler"].get<std::string>());
    if (!handler) {
        throw Error(ErrorCode::ParseFailure, "unknown handler \"" + j["handler"].get<std::string>() + "\"");
    }
    if (!j.contains("confidence") || !j["confidence"].is_number()) {
        throw Error(ErrorCode::ParseFailure, "confidence must be a number");
    }
    if (!j.contains("reason") || !j["reason"].is_string()) {
        throw Error(ErrorCode::ParseFailure, "reason must be a string");
    }
    double confidence = j["confidence"].get<double>();
    if (std::isnan(confidence)) throw Error(ErrorCode::ParseFailure, "confidence is NaN");
    confidence = std::clamp(confidence, 0.0, 1.0);
    return {*handler, confidence, j["reason"].get<std::string>(), false};
}

RouteDecision classify(std::string_view query, const PageContext& context, llm::Gateway& gateway) {
    if (text::trim(query).empty()) throw Error(ErrorCode::BadRequest, "query must not be empty");
    const auto reply = gateway.complete(gateway.make_request(build_messages(query, context)));
    try {
        return parse_route_response(reply.text);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ParseFailure) throw;
        return {Handler::Find, 0.0, std::string(kFallbackReason), true};
    }
}

DispatchResult dispatch(const RouteDecision& decision, const DispatchRequest& request, llm::Gateway& gateway) {
    switch (decision.handler) {
        case Handler::ImageFind:
        case Handler::PdfFind:
            return NotImplemented{decision.handler};
        case Handler::Guide: {
            auto session = std::make_shared<guide::GuideSession>(request.query, request.sequence, request.options);
            session->next_step(gateway);
            return session;
        }
        case Handler::Find:
        case Handler::Hide:
            break;
    }
    if (request.sequence.empty()) throw Error(ErrorCode::EmptySequence, "dispatch needs a snapshot");
    const ElementIndex index = build_index(request.sequence.front(), request.options);
    if (decision.handler == Handler::Hide) return hide::propose(request.query, index, gateway, request.options);
    find::FindOptions options;
    options.index = request.options;
    return find::answer(request.query, index, request.history, gateway, options);
}

json to_json(const RouteDecision& d) {
    return {{"handler", std::string(to_string(d.handler))},
            {"confidence", d.confidence},
            {"reason", d.reason},
            {"fallback_applied", d.fallback_applied}};
}

json to_json(const DispatchResult& r) {
    struct Visitor {
        json operator()(const find::GroundedAnswer& a) const { return {{"kind", "find"}, {"result", find::to_json(a)}}; }
        json operator()(const hide::HideProposal& p) const { return {{"kind", "hide"}, {"result", hide::to_json(p)}}; }
        json operator()(const std::shared_ptr<guide::GuideSession>& s) const {
            json result = s->to_json();
            result.erase("session_id");
            if (s->state() == guide::SessionState::AwaitingUser) result["step_card"] = s->step_card();
            return {{"kind", "guide"}, {"result", std::move(result)}};
        }
        json operator()(const NotImplemented& n) const {
            return {{"kind", "not_implemented"}, {"handler", std::string(to_string(n.handler))}};
        }
    };
    return std::visit(Visitor{}, r);
}

}  // namespace pageguide::router
