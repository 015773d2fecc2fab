#include "pageguide/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "pageguide/error.hpp"
#include "pageguide/eval_harness.hpp"
#include "pageguide/find_engine.hpp"
#include "pageguide/guide_engine.hpp"
#include "pageguide/hide_engine.hpp"
#include "pageguide/intent_router.hpp"
#include "pageguide/service_api.hpp"
#include "pageguide/snapshot.hpp"
#include "pageguide/text.hpp"

namespace pageguide::cli {

using nlohmann::json;
namespace fs = std::filesystem;

IndexOptions Config::index_options() const {
    IndexOptions o;
    o.elem_clip = elem_clip;
    o.fuzzy_min = fuzzy_min;
    return o;
}

llm::StoreMode Config::effective_mode() const {
    if (mode) return *mode;
    return replay ? llm::StoreMode::Replay : llm::StoreMode::Passthrough;
}

namespace {

const std::map<std::string, std::string> kEnvKeys = {{"model", kModelEnv}, {"base_url", kBaseUrlEnv}};

std::map<std::string, std::string> read_config_file(const fs::path& file) {
    std::map<std::string, std::string> out;
    std::ifstream in(file);
    if (!in) return out;
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_config(in);
    } catch (const CLI::Error& e) {
        throw Error(ErrorCode::Usage, file.string() + ": " + e.what());
    }
    for (const auto& item : items) {
        if (!item.parents.empty() || item.inputs.size() != 1) continue;
        out[item.name] = item.inputs.front();
    }
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream ss(value);
    T v{};
    ss >> v;
    if (!ss || !ss.eof()) throw Error(ErrorCode::Usage, "invalid value for " + key + ": " + value);
    return v;
}

}  // namespace

Config resolve_config(const ConfigSources& sources) {
    std::vector<std::map<std::string, std::string>> files;
    for (const auto& f : sources.files) files.push_back(read_config_file(f));

    auto lookup = [&](const std::string& key) -> std::optional<std::string> {
        if (auto it = sources.flags.find(key); it != sources.flags.end()) return it->second;
        if (auto it = kEnvKeys.find(key); it != kEnvKeys.end() && sources.env) {
            if (auto v = sources.env(it->second); v && !v->empty()) return v;
        }
        for (const auto& f : files) {
            if (auto it = f.find(key); it != f.end()) return it->second;
        }
        return std::nullopt;
    };

    Config c;
    if (auto v = lookup("model")) c.model = *v;
    if (auto v = lookup("base_url")) c.base_url = *v;
    if (auto v = lookup("replay")) c.replay = fs::path(*v);
    if (auto v = lookup("mode")) {
        c.mode = llm::parse_store_mode(*v);
        if (!c.mode) throw Error(ErrorCode::Usage, "mode must be record, replay or passthrough");
    }
    if (auto v = lookup("timeout_ms")) c.timeout_ms = parse_number<int>("timeout_ms", *v);
    if (auto v = lookup("elem_clip")) c.elem_clip = parse_number<std::size_t>("elem_clip", *v);
    if (auto v = lookup("fuzzy_min")) c.fuzzy_min = parse_number<double>("fuzzy_min", *v);
    if (auto v = lookup("max_body")) c.max_body = parse_number<std::size_t>("max_body", *v);
    if (sources.env) {
        if (auto v = sources.env(llm::kApiKeyEnv); v && !v->empty()) c.api_key = v;
    }

    if (c.timeout_ms <= 0) throw Error(ErrorCode::Usage, "timeout_ms must be positive");
    if (c.elem_clip < 1) throw Error(ErrorCode::Usage, "elem_clip must be at least 1");
    if (!(c.fuzzy_min > 0.0 && c.fuzzy_min <= 1.0)) throw Error(ErrorCode::Usage, "fuzzy_min must be in (0, 1]");
    if (c.max_body < 1) throw Error(ErrorCode::Usage, "max_body must be positive");
    if (c.model.empty()) throw Error(ErrorCode::Usage, "model must not be empty");
    return c;
}

std::vector<fs::path> default_config_files() {
    std::vector<fs::path> out{fs::current_path() / kConfigFileName};
    if (const char* xdg = std::getenv("XDG_CONFIG_HOME"); xdg && *xdg) {
        out.push_back(fs::path(xdg) / "pageguide" / kConfigFileName);
    } else if (const char* home = std::getenv("HOME"); home && *home) {
        out.push_back(fs::path(home) / ".config" / "pageguide" / kConfigFileName);
    }
    return out;
}

std::shared_ptr<llm::Gateway> make_gateway(const Config& config) {
    const llm::StoreMode mode = config.effective_mode();
    std::shared_ptr<llm::TranscriptStore> store;
    if (mode == llm::StoreMode::Passthrough) {
        store = std::make_shared<llm::TranscriptStore>(mode);
    } else {
        if (!config.replay) {
            throw Error(ErrorCode::Usage, std::string(llm::to_string(mode)) + " mode needs a transcript (--replay FILE)");
        }
        store = llm::TranscriptStore::open(*config.replay, mode);
    }
    llm::GatewayConfig g;
    g.base_url = config.base_url;
    g.model = config.model;
    g.api_key = config.api_key;
    g.timeout = std::chrono::milliseconds(config.timeout_ms);
    return std::make_shared<llm::Gateway>(g, store);
}

namespace {

struct Common {
    std::string replay;
    std::string mode;
    std::string model;
    std::string base_url;
    std::string config_file;
    bool json = false;
    std::vector<CLI::Option*> options;

    void attach(CLI::App* sub, bool with_json = true) {
        options.push_back(sub->add_option("--replay", replay, "Transcript file (JSON Lines)"));
        options.push_back(sub->add_option("--mode", mode, "record | replay | passthrough")
                              ->check(CLI::IsMember({"record", "replay", "passthrough"})));
        options.push_back(sub->add_option("--model", model, "Model name"));
        options.push_back(sub->add_option("--base-url", base_url, "Chat-completions base URL"));
        sub->add_option("--config", config_file, "Config file (TOML)")->check(CLI::ExistingFile);
        if (with_json) sub->add_flag("--json", json, "Machine-readable output");
    }

    Config resolve() const {
        ConfigSources src;
        auto set_if = [&](std::size_t i, const char* key, const std::string& value) {
            if (options[i]->count() > 0) src.flags[key] = value;
        };
        set_if(0, "replay", replay);
        set_if(1, "mode", mode);
        set_if(2, "model", model);
        set_if(3, "base_url", base_url);
        src.env = [](const std::string& name) -> std::optional<std::string> {
            if (const char* v = std::getenv(name.c_str())) return std::string(v);
            return std::nullopt;
        };
        if (!config_file.empty()) src.files.push_back(config_file);
        for (const auto& f : default_config_files()) src.files.push_back(f);
        return resolve_config(src);
    }
};

std::set<int> parse_id_list(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string_view t = text::trim(item);
        if (t.empty()) continue;
        if (t.find_first_not_of("0123456789") != std::string_view::npos || t.size() > 9) {
            throw Error(ErrorCode::Usage, "invalid element id \"" + std::string(t) + "\"");
        }
        out.insert(std::stoi(std::string(t)));
    }
    return out;
}

json index_line(const IndexedElement& e) {
    return {{"id", e.id},
            {"text", e.text},
            {"tag", e.tag},
            {"bbox", {{"x", e.bbox.x}, {"y", e.bbox.y}, {"w", e.bbox.w}, {"h", e.bbox.h}}},
            {"interactive", e.interactive},
            {"node_path", e.node_path.str()}};
}

void print_card(std::ostream& out, const json& card) {
    out << "Step " << card["step_no"].get<int>() << ": " << card["instruction"].get<std::string>() << "\n";
    if (!card["hint"].get<std::string>().empty()) out << "  hint: " << card["hint"].get<std::string>() << "\n";
    if (!card["target"].is_null()) {
        out << "  target: [" << card["target"]["element_id"].get<int>() << "] "
            << card["target"]["text"].get<std::string>() << "\n";
    }
    out << "  controls:";
    for (const auto& c : card["controls"]) out << " [" << c.get<std::string>() << "]";
    out << "\n";
}

// Drives a session to a terminal state. Commands come from `commands`
// (n/next, s/stop); with no stream every step is confirmed. End of input
// stops the session.
json run_guide(guide::GuideSession& session, llm::Gateway& gateway, std::istream* commands, bool json_out,
               std::ostream& out) {
    json cards = json::array();
    json reports = json::array();
    auto pending = [&] {
        return session.state() == guide::SessionState::AwaitingStep ||
               session.state() == guide::SessionState::Replanning;
    };
    while (pending()) {
        session.next_step(gateway);
        const json card = session.step_card();
        cards.push_back(card);
        if (!json_out) print_card(out, card);
        std::string cmd = "n";
        if (commands) {
            cmd.clear();
            std::string line;
            while (cmd.empty() && std::getline(*commands, line)) cmd = text::to_lower_ascii(text::trim(line));
            if (cmd.empty()) cmd = "s";
        }
        if (cmd == "s" || cmd == "stop") {
            session.stop();
            if (!json_out) out << "stopped\n";
            break;
        }
        if (cmd != "n" && cmd != "next") throw Error(ErrorCode::Usage, "guide commands are n (next) or s (stop)");
        const auto report = session.confirm_step();
        reports.push_back(guide::to_json(report));
        if (!json_out && !report.terminal) {
            out << "  page re-read: " << (report.verdict == guide::Verdict::Diverged ? "diverged, re-planning" : "consistent")
                << "\n";
        }
    }
    json summary = session.to_json();
    summary.erase("session_id");
    if (!json_out) out << "state: " << guide::to_string(session.state()) << "\n";
    return {{"session", std::move(summary)}, {"cards", std::move(cards)}, {"reports", std::move(reports)}};
}

void print_find(std::ostream& out, const find::GroundedAnswer& a) {
    out << a.display_text << "\n";
    if (!a.resolution.plan.entries.empty()) {
        out << "\n#  element  match                       phrase\n";
        for (std::size_t i = 0; i < a.resolution.plan.entries.size(); ++i) {
            const auto& e = a.resolution.plan.entries[i];
            std::string match = "whole-element";
            if (e.span) {
                match = std::string(to_string(e.span->tier)) + " " + std::to_string(e.span->start) + ".." +
                        std::to_string(e.span->end);
            }
            out << std::left << std::setw(3) << (i + 1) << std::setw(9) << e.element_id << std::setw(28) << (match + " ")
                << e.phrase << "\n";
        }
    }
    for (const auto& c : a.resolution.unresolved) {
        out << "unresolved: [" << c.element_id << "] " << c.phrase << "\n";
    }
    for (const auto& l : a.external_links) out << "link: " << l.label << " <" << l.url << ">\n";
}

void print_proposal(std::ostream& out, const hide::HideProposal& p) {
    out << p.message << "\n";
    if (p.candidates.empty()) return;
    out << "rank  id    reason / snippet\n";
    for (const auto& c : p.candidates) {
        out << std::left << std::setw(6) << c.rank << std::setw(6) << c.element_id << c.reason << "\n"
            << std::string(12, ' ') << c.snippet << "\n";
    }
}

std::vector<Snapshot> load_pages(const std::string& snapshot_dir, const std::string& sequence_file) {
    if (!sequence_file.empty()) return load_sequence(sequence_file);
    return {load_snapshot(snapshot_dir)};
}

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in) {
    CLI::App app{"pageguide: ground model answers in page elements"};
    app.name("pageguide");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    // index
    struct {
        std::string snapshot;
        bool prompt = false;
        std::size_t budget = 24000;
        Common common;
    } ix;
    auto* index_cmd = app.add_subcommand("index", "Print the element index of a snapshot");
    index_cmd->add_option("--snapshot", ix.snapshot, "Snapshot bundle directory")->required();
    index_cmd->add_flag("--prompt", ix.prompt, "Print the prompt listing instead of JSON lines");
    index_cmd->add_option("--budget", ix.budget, "Prompt listing budget in characters");
    ix.common.attach(index_cmd, false);

    // route
    struct {
        std::string snapshot, sequence, query, script;
        bool dispatch = false;
        Common common;
    } rt;
    auto* route_cmd = app.add_subcommand("route", "Classify a query into a handler");
    route_cmd->add_option("--snapshot", rt.snapshot, "Snapshot bundle directory");
    route_cmd->add_option("--sequence", rt.sequence, "Snapshot sequence manifest (guide)");
    route_cmd->add_option("--query", rt.query, "User query")->required();
    route_cmd->add_flag("--dispatch", rt.dispatch, "Also run the chosen handler");
    route_cmd->add_option("--script", rt.script, "Guide confirmation script (n/s per line)");
    rt.common.attach(route_cmd);

    // find
    struct {
        std::string snapshot, query;
        Common common;
    } fd;
    auto* find_cmd = app.add_subcommand("find", "Answer a question with cited page evidence");
    find_cmd->add_option("--snapshot", fd.snapshot, "Snapshot bundle directory")->required();
    find_cmd->add_option("--query", fd.query, "Question")->required();
    fd.common.attach(find_cmd);

    // guide
    struct {
        std::string snapshot, sequence, query, script;
        Common common;
    } gd;
    auto* guide_cmd = app.add_subcommand("guide", "Step-by-step guidance; reads n/s from stdin");
    guide_cmd->add_option("--snapshot", gd.snapshot, "Snapshot bundle directory");
    guide_cmd->add_option("--sequence", gd.sequence, "Snapshot sequence manifest");
    guide_cmd->add_option("--query", gd.query, "How-to question")->required();
    guide_cmd->add_option("--script", gd.script, "Read confirmations from a file instead of stdin")->check(CLI::ExistingFile);
    gd.common.attach(guide_cmd);

    // hide
    struct {
        std::string snapshot, request, uncheck, out_dir;
        bool confirm = false;
        Common common;
    } hd;
    auto* hide_cmd = app.add_subcommand("hide", "Propose (and optionally apply) elements to hide");
    hide_cmd->add_option("--snapshot", hd.snapshot, "Snapshot bundle directory")->required();
    hide_cmd->add_option("--request", hd.request, "What to hide")->required();
    hide_cmd->add_option("--uncheck", hd.uncheck, "Comma-separated ids to leave visible");
    hide_cmd->add_flag("--confirm", hd.confirm, "Apply the reviewed proposal");
    hide_cmd->add_option("--out", hd.out_dir, "Directory for the mutated bundle and mutation.json");
    hd.common.attach(hide_cmd);

    // eval
    struct {
        std::string kind, data, report;
        bool live = false;
        Common common;
    } ev;
    auto* eval_cmd = app.add_subcommand("eval", "Compute metrics over a dataset");
    eval_cmd->add_option("--kind", ev.kind, "router | find | hide | guide")
        ->required()
        ->check(CLI::IsMember({"router", "find", "hide", "guide"}));
    eval_cmd->add_option("--data", ev.data, "Dataset (JSON Lines)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--report", ev.report, "Also write the report to this file");
    eval_cmd->add_flag("--live", ev.live, "Call the live model instead of replaying");
    ev.common.attach(eval_cmd, false);

    // serve
    struct {
        int port = 0;
        std::string handshake;
        Common common;
    } sv;
    auto* serve_cmd = app.add_subcommand("serve", "Run the local HTTP service on 127.0.0.1");
    serve_cmd->add_option("--port", sv.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--handshake", sv.handshake, "Write {port, secret} to this file");
    sv.common.attach(serve_cmd, false);

    // record
    struct {
        std::string transcript, kind, data, pipeline, snapshot, query;
        Common common;
    } rc;
    auto* record_cmd = app.add_subcommand("record", "Run pipelines live and append their transcripts");
    record_cmd->add_option("--transcript", rc.transcript, "Transcript file to append to")->required();
    record_cmd->add_option("--kind", rc.kind, "Dataset kind")->check(CLI::IsMember({"router", "find", "hide", "guide"}));
    record_cmd->add_option("--data", rc.data, "Dataset (JSON Lines)");
    record_cmd->add_option("--pipeline", rc.pipeline, "route | find | hide")
        ->check(CLI::IsMember({"route", "find", "hide"}));
    record_cmd->add_option("--snapshot", rc.snapshot, "Snapshot bundle directory");
    record_cmd->add_option("--query", rc.query, "Query or hide request");
    rc.common.attach(record_cmd, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*index_cmd) {
            const Config config = ix.common.resolve();
            const Snapshot s = load_snapshot(ix.snapshot);
            const ElementIndex index = build_index(s, config.index_options());
            if (ix.prompt) {
                out << serialize_index(index, ix.budget, config.index_options()) << "\n";
            } else {
                for (const auto& e : index.elements) out << index_line(e).dump() << "\n";
            }
            return 0;
        }

        if (*route_cmd) {
            if (rt.snapshot.empty() == rt.sequence.empty()) throw Error(ErrorCode::Usage, "give exactly one of --snapshot or --sequence");
            const Config config = rt.common.resolve();
            auto gateway = make_gateway(config);
            const auto pages = load_pages(rt.snapshot, rt.sequence);
            const auto decision = router::classify(rt.query, router::page_context(pages.front()), *gateway);
            json result = router::to_json(decision);
            if (!rt.dispatch) {
                out << result.dump(2) << "\n";
                return 0;
            }
            router::DispatchRequest request{rt.query, pages, {}, config.index_options()};
            if (decision.handler == router::Handler::Guide) {
                // Guide needs the confirmation loop, so run it here rather than
                // through dispatch's single staged step.
                guide::GuideSession session(rt.query, pages, config.index_options());
                std::ifstream script;
                if (!rt.script.empty()) {
                    script.open(rt.script);
                    if (!script) throw Error(ErrorCode::MissingFile, "cannot read " + rt.script);
                }
                if (!rt.common.json) out << "handler: guide\n";
                json g = run_guide(session, *gateway, rt.script.empty() ? nullptr : &script, rt.common.json, out);
                if (rt.common.json) out << json({{"route", result}, {"kind", "guide"}, {"result", g}}).dump(2) << "\n";
                return 0;
            }
            const auto outcome = router::dispatch(decision, request, *gateway);
            json payload = router::to_json(outcome);
            payload["route"] = result;
            if (rt.common.json) {
                out << payload.dump(2) << "\n";
            } else {
                out << "handler: " << router::to_string(decision.handler) << "\n";
                if (auto* a = std::get_if<find::GroundedAnswer>(&outcome)) print_find(out, *a);
                else if (auto* p = std::get_if<hide::HideProposal>(&outcome)) print_proposal(out, *p);
                else out << "handler not implemented\n";
            }
            return 0;
        }

        if (*find_cmd) {
            const Config config = fd.common.resolve();
            auto gateway = make_gateway(config);
            const ElementIndex index = build_index(load_snapshot(fd.snapshot), config.index_options());
            find::FindOptions options;
            options.index = config.index_options();
            const auto a = find::answer(fd.query, index, {}, *gateway, options);
            if (fd.common.json) out << find::to_json(a).dump(2) << "\n";
            else print_find(out, a);
            return 0;
        }

        if (*guide_cmd) {
            if (gd.snapshot.empty() == gd.sequence.empty()) throw Error(ErrorCode::Usage, "give exactly one of --snapshot or --sequence");
            const Config config = gd.common.resolve();
            auto gateway = make_gateway(config);
            guide::GuideSession session(gd.query, load_pages(gd.snapshot, gd.sequence), config.index_options());
            std::ifstream script;
            std::istream* commands = &in;
            if (!gd.script.empty()) {
                script.open(gd.script);
                commands = &script;
            }
            const json result = run_guide(session, *gateway, commands, gd.common.json, out);
            if (gd.common.json) out << result.dump(2) << "\n";
            return 0;
        }

        if (*hide_cmd) {
            const Config config = hd.common.resolve();
            auto gateway = make_gateway(config);
            const Snapshot s = load_snapshot(hd.snapshot);
            const ElementIndex index = build_index(s, config.index_options());
            const auto proposal = hide::propose(hd.request, index, *gateway, config.index_options());
            json result = {{"proposal", hide::to_json(proposal)}};
            if (!hd.common.json) print_proposal(out, proposal);
            if (hd.confirm) {
                auto decision = hide::review(proposal, parse_id_list(hd.uncheck));
                auto [mutated, record] = hide::apply(decision, s, index);
                json confirmed = json::array();
                for (int id : decision.confirmed_ids) confirmed.push_back(id);
                result["confirmed_ids"] = confirmed;
                result["mutation_record"] = hide::to_json(record);
                if (!hd.out_dir.empty()) {
                    save_snapshot(mutated, hd.out_dir);
                    std::ofstream m(fs::path(hd.out_dir) / "mutation.json", std::ios::binary | std::ios::trunc);
                    if (!m) throw Error(ErrorCode::IoError, "cannot write mutation.json");
                    m << hide::to_json(record).dump(2) << "\n";
                }
                if (!hd.common.json) out << "hidden: " << confirmed.dump() << "\n";
            }
            if (hd.common.json) out << result.dump(2) << "\n";
            return 0;
        }

        if (*eval_cmd) {
            Config config = ev.common.resolve();
            if (ev.live) config.mode = llm::StoreMode::Passthrough;
            auto gateway = make_gateway(config);
            const json report = eval::run_eval(*eval::parse_kind(ev.kind), ev.data, *gateway);
            out << report.dump(2) << "\n";
            if (!ev.report.empty()) {
                std::ofstream f(ev.report, std::ios::binary | std::ios::trunc);
                if (!f) throw Error(ErrorCode::IoError, "cannot write " + ev.report);
                f << report.dump(2) << "\n";
            }
            return report["errors"].empty() ? 0 : 1;
        }

        if (*serve_cmd) {
            const Config config = sv.common.resolve();
            auto gateway = make_gateway(config);
            service::ServiceConfig sc;
            sc.max_body = config.max_body;
            sc.secret = service::generate_secret();
            sc.index = config.index_options();
            service::Service svc(gateway, sc);
            g_interrupted = false;
            auto previous_int = std::signal(SIGINT, on_signal);
            auto previous_term = std::signal(SIGTERM, on_signal);
            std::thread watcher([&svc] {
                while (!svc.wait_until_listening(std::chrono::milliseconds(50)) && !g_interrupted) {}
                while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(50));
                svc.stop();
            });
            std::thread announcer([&] {
                if (svc.wait_until_listening(std::chrono::seconds(10))) {
                    err << "listening on http://127.0.0.1:" << svc.bound_port() << "\n"
                        << "secret: " << sc.secret << "\n";
                    err.flush();
                }
            });
            try {
                svc.serve(sv.port, sv.handshake.empty() ? std::nullopt : std::optional<fs::path>(sv.handshake));
            } catch (...) {
                g_interrupted = true;
                announcer.join();
                watcher.join();
                throw;
            }
            g_interrupted = true;
            announcer.join();
            watcher.join();
            std::signal(SIGINT, previous_int);
            std::signal(SIGTERM, previous_term);
            return 0;
        }

        if (*record_cmd) {
            Config config = rc.common.resolve();
            config.replay = rc.transcript;
            config.mode = llm::StoreMode::Record;
            auto gateway = make_gateway(config);
            const auto before = gateway->store()->keys();
            int status = 0;
            if (!rc.data.empty() || !rc.kind.empty()) {
                if (rc.data.empty() || rc.kind.empty()) throw Error(ErrorCode::Usage, "--kind and --data go together");
                const json report = eval::run_eval(*eval::parse_kind(rc.kind), rc.data, *gateway);
                status = report["errors"].empty() ? 0 : 1;
            } else {
                if (rc.pipeline.empty() || rc.snapshot.empty() || rc.query.empty()) {
                    throw Error(ErrorCode::Usage, "record needs --kind/--data or --pipeline with --snapshot and --query");
                }
                const Snapshot s = load_snapshot(rc.snapshot);
                if (rc.pipeline == "route") {
                    router::classify(rc.query, router::page_context(s), *gateway);
                } else {
                    const ElementIndex index = build_index(s, config.index_options());
                    if (rc.pipeline == "find") find::answer(rc.query, index, {}, *gateway);
                    else hide::propose(rc.query, index, *gateway, config.index_options());
                }
            }
            const std::set<std::string> old(before.begin(), before.end());
            std::size_t added = 0;
            for (const auto& k : gateway->store()->keys()) {
                if (!old.count(k)) {
                    out << k << "\n";
                    ++added;
                }
            }
            err << added << " new transcript entries\n";
            return status;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        if (!e.detail().is_null()) err << "detail: " << e.detail().dump() << "\n";
        return e.code() == ErrorCode::Usage ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace pageguide::cli
