#include "groom/cli.hpp"

#include "groom/config.hpp"
#include "groom/dedup.hpp"
#include "groom/evaluation.hpp"
#include "groom/gateway.hpp"
#include "groom/genai.hpp"
#include "groom/json_io.hpp"
#include "groom/review.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <fstream>
#include <pthread.h>
#include <thread>

namespace groom {

using json = nlohmann::json;

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParseError:
    case ErrorCode::SelfPair:
    case ErrorCode::NonPositiveBaseline:
    case ErrorCode::UnknownIssueKey:
        return kExitConfig;
    default:
        return kExitRuntime;
    }
}

namespace {

struct Options {
    std::string config_file;
    std::string fixture;
    std::string project;
    std::string base_url;
    std::optional<double> threshold;
    std::string embed_provider;
    std::string chat_provider;
    std::string prompt_dir;
    std::string cache;

    std::string out;
    bool auto_mode = false;
    std::string truth;

    std::string predictions;
    double time_seconds = 0.0;
    std::string format = "json";
    std::string participant = "run";
    bool show_matrix = false;

    std::string host;
    std::optional<int> port;
    std::string static_dir;

    std::string prompt;
    std::size_t max_suggestions = 5;
    std::string description;
};

void add_source_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--fixture", o.fixture, "Backlog fixture JSON file");
    cmd->add_option("--project", o.project, "Tracker project key");
    cmd->add_option("--base-url", o.base_url, "Tracker base URL");
}

void add_engine_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--threshold", o.threshold, "Duplicate threshold in (0, 1]");
    cmd->add_option("--embed-provider", o.embed_provider, "local_hash or remote");
    cmd->add_option("--cache", o.cache, "Embedding cache file");
}

void add_chat_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--chat-provider", o.chat_provider, "mock or remote");
    cmd->add_option("--prompt-dir", o.prompt_dir, "Prompt template directory");
}

AppConfig resolve_config(const Options& o) {
    AppConfig c = load_config(o.config_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(o.config_file));
    if (!o.fixture.empty()) {
        c.gateway.mode = GatewayMode::Fixture;
        c.gateway.fixture_path = o.fixture;
    }
    if (!o.project.empty()) {
        c.gateway.project_key = o.project;
        if (o.fixture.empty()) {
            c.gateway.mode = GatewayMode::Rest;
        }
    }
    if (!o.base_url.empty()) {
        c.gateway.base_url = o.base_url;
    }
    if (o.threshold) {
        c.engine.duplicate_threshold = *o.threshold;
    }
    if (!o.embed_provider.empty()) {
        c.embedding.provider = parse_embedding_provider(o.embed_provider);
    }
    if (!o.cache.empty()) {
        c.embedding_cache = o.cache;
    }
    if (!o.chat_provider.empty()) {
        c.chat.provider = parse_chat_provider(o.chat_provider);
    }
    if (!o.prompt_dir.empty()) {
        c.prompt_dir = o.prompt_dir;
    }
    if (!o.host.empty()) {
        c.server_host = o.host;
    }
    if (o.port) {
        c.server_port = *o.port;
    }
    if (!o.static_dir.empty()) {
        c.static_dir = o.static_dir;
    }
    if (!o.description.empty()) {
        c.project_description = o.description;
    }
    if (!o.truth.empty()) {
        c.truth_path = o.truth;
    }
    validate(c.engine);
    return c;
}

void require_source(const AppConfig& c) {
    if (c.gateway.mode == GatewayMode::Fixture && c.gateway.fixture_path.empty()) {
        throw Error(ErrorCode::ConfigError, "one of --fixture or --project is required");
    }
    validate(c.gateway);
}

// Provider setup failures count as provider errors, not usage errors.
template <typename F>
auto as_provider_error(F&& build) {
    try {
        return build();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::InvalidArgument) {
            throw Error(ErrorCode::ProviderError, std::string("provider misconfigured: ") + e.what());
        }
        throw;
    }
}

std::shared_ptr<Embedder> make_embedder(const AppConfig& c) {
    return as_provider_error([&] {
        validate(c.embedding);
        auto provider = make_embedding_provider(c.embedding);
        auto cache = c.embedding_cache.empty() ? std::make_shared<EmbeddingCache>()
                                               : std::make_shared<EmbeddingCache>(c.embedding_cache);
        return std::make_shared<Embedder>(provider, c.embedding, cache);
    });
}

std::shared_ptr<ChatProvider> make_chat(const AppConfig& c) {
    return as_provider_error([&] {
        validate(c.chat);
        return make_chat_provider(c.chat);
    });
}

std::shared_ptr<const PromptLibrary> make_prompts(const AppConfig& c) {
    return std::make_shared<const PromptLibrary>(c.prompt_dir.empty() ? PromptLibrary::default_directory()
                                                                      : c.prompt_dir);
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw Error(ErrorCode::ConfigError, "cannot write " + path);
    }
    file << text;
    if (!file) {
        throw Error(ErrorCode::ConfigError, "cannot write " + path);
    }
}

std::string pairs_csv(const std::set<IssuePair>& pairs) {
    std::string csv = "issue_a,issue_b\n";
    for (const auto& p : pairs) {
        csv += p.a + "," + p.b + "\n";
    }
    return csv;
}

std::optional<GroundTruth> load_truth(const AppConfig& c, const std::optional<BacklogSnapshot>& companion) {
    if (c.truth_path.empty()) {
        return std::nullopt;
    }
    return load_ground_truth(c.truth_path, companion);
}

int cmd_fetch(const Options& o, std::ostream& out) {
    auto c = resolve_config(o);
    require_source(c);
    auto snapshot = make_gateway(c.gateway)->fetch_backlog();
    write_text(o.out, to_json(snapshot).dump(2) + "\n", out);
    return kExitOk;
}

int cmd_scan(const Options& o, std::ostream& out) {
    auto c = resolve_config(o);
    require_source(c);
    auto embedder = make_embedder(c);
    auto snapshot = make_gateway(c.gateway)->fetch_backlog();
    auto candidates = detect_duplicates(snapshot, *embedder, c.engine);
    json list = json::array();
    for (const auto& cand : candidates) {
        list.push_back(to_json(cand));
    }
    write_text(o.out, list.dump(2) + "\n", out);
    return kExitOk;
}

int cmd_groom(const Options& o, std::ostream& out, std::ostream& err) {
    if (!o.auto_mode) {
        err << "groom: interactive grooming runs in the review UI; start it with `groom serve`, "
               "or pass --auto to accept every suggestion\n";
        return kExitConfig;
    }
    auto c = resolve_config(o);
    require_source(c);

    ReviewServiceDeps deps;
    deps.embedder = make_embedder(c);
    deps.chat = make_chat(c);
    deps.prompts = make_prompts(c);
    deps.drafter = std::make_shared<ChatMergeDrafter>(deps.chat, deps.prompts);
    auto gateway = make_gateway(c.gateway);
    auto service = std::make_shared<ReviewService>(deps);
    auto id = service->start_session(gateway, c.engine, SessionMode::Auto, c.project_description);
    auto truth = load_truth(c, service->get(id).snapshot);

    json receipts = json::array();
    try {
        for (const auto& r : service->apply(id).receipts) {
            receipts.push_back(to_json(r));
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NothingToApply) {
            throw;
        }
        err << "groom: no duplicates found at threshold " << c.engine.duplicate_threshold << "\n";
    }

    auto session = service->get(id);
    auto pairs = predicted_pairs(session);
    if (!o.out.empty()) {
        write_text(o.out, pairs_csv(pairs), out);
    }
    json pair_list = json::array();
    for (const auto& p : pairs) {
        pair_list.push_back(to_json(p));
    }
    json result{{"session_id", id},
                {"receipts", receipts},
                {"predicted_pairs", pair_list},
                {"time_seconds", session.applied_at ? json(std::chrono::duration<double>(*session.applied_at -
                                                                                         session.started_at)
                                                               .count())
                                                    : json(nullptr)},
                {"metrics", nullptr}};
    if (truth) {
        auto cm = score(pairs, *truth);
        ResultRow row{"auto", cm, metrics(cm, result["time_seconds"].is_null() ? 0.0 : result["time_seconds"].get<double>())};
        result["metrics"] = json::parse(to_json(row).dump());
    }
    out << result.dump(2) << "\n";
    return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
    auto c = resolve_config(o);
    if (c.truth_path.empty()) {
        throw Error(ErrorCode::ConfigError, "--truth is required");
    }
    if (o.format != "json" && o.format != "csv") {
        throw Error(ErrorCode::ConfigError, "--format must be json or csv");
    }
    if (o.time_seconds < 0.0) {
        throw Error(ErrorCode::ConfigError, "--time-seconds must be non-negative");
    }
    std::optional<BacklogSnapshot> companion;
    if (!o.fixture.empty()) {
        companion = FixtureGateway(o.fixture).fetch_backlog();
    }
    auto truth = *load_truth(c, companion);
    auto predicted = load_predictions(o.predictions);
    auto cm = score(predicted, truth);
    ResultRow row{o.participant, cm, metrics(cm, o.time_seconds)};
    if (o.format == "csv") {
        out << csv_header() << "\n" << to_csv_line(row) << "\n";
    } else {
        out << to_json(row).dump(2) << "\n";
    }
    if (o.show_matrix) {
        err << render_confusion_matrix(cm);
    }
    return kExitOk;
}

int cmd_suggest(const Options& o, std::ostream& out) {
    auto c = resolve_config(o);
    require_source(c);
    auto embedder = make_embedder(c);
    auto chat = make_chat(c);
    auto prompts = make_prompts(c);
    auto snapshot = make_gateway(c.gateway)->fetch_backlog();
    SuggestionRequest request;
    request.project_description = c.project_description;
    request.issue_digest = make_issue_digest(snapshot);
    request.user_prompt = o.prompt;
    request.max_suggestions = o.max_suggestions;
    auto suggestions = suggest_new_issues(request, snapshot, *chat, *prompts, *embedder, c.engine);
    json list = json::array();
    for (const auto& s : suggestions) {
        list.push_back(to_json(s));
    }
    write_text(o.out, list.dump(2) + "\n", out);
    return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
    auto c = resolve_config(o);
    if (c.gateway.mode == GatewayMode::Rest) {
        validate(c.gateway);
    }

    ReviewServiceDeps deps;
    deps.embedder = make_embedder(c);
    deps.chat = make_chat(c);
    deps.prompts = make_prompts(c);
    deps.drafter = std::make_shared<ChatMergeDrafter>(deps.chat, deps.prompts);
    if (!c.truth_path.empty() && !c.gateway.fixture_path.empty()) {
        deps.truth = load_truth(c, FixtureGateway(c.gateway.fixture_path).fetch_backlog());
    }
    auto service = std::make_shared<ReviewService>(deps);

    const GatewayConfig base = c.gateway;
    auto factory = [base](const json& request) {
        GatewayConfig g = base;
        if (request.contains("fixture")) {
            g.mode = GatewayMode::Fixture;
            g.fixture_path = request.at("fixture").get<std::string>();
        } else if (request.contains("project")) {
            g.mode = GatewayMode::Rest;
            g.project_key = request.at("project").get<std::string>();
        }
        if (g.mode == GatewayMode::Fixture && g.fixture_path.empty()) {
            throw Error(ErrorCode::InvalidArgument, "request names no fixture and the server has no default");
        }
        validate(g);
        return make_gateway(g);
    };
    ReviewServer server(service, factory, c.engine, c.project_description);
    if (!c.static_dir.empty()) {
        server.mount_static(c.static_dir.string());
    }

    // Signals are taken synchronously by one thread so that handler threads
    // are never interrupted.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    sigset_t previous;
    pthread_sigmask(SIG_BLOCK, &signals, &previous);

    if (!server.bind(c.server_host, c.server_port)) {
        pthread_sigmask(SIG_SETMASK, &previous, nullptr);
        err << "serve: cannot bind " << c.server_host << ":" << c.server_port << "\n";
        return kExitRuntime;
    }
    out << json{{"host", c.server_host}, {"port", server.port()}}.dump() << std::endl;
    err << "serve: listening on http://" << c.server_host << ":" << server.port() << "\n";

    std::atomic<bool> done{false};
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        if (!done.load()) {
            err << "serve: shutting down\n";
            server.stop();
        }
    });
    server.listen();
    done = true;
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();

    // Discard whatever signal woke the waiter before unblocking.
    timespec zero{0, 0};
    while (sigtimedwait(&signals, nullptr, &zero) > 0) {
    }
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Backlog grooming: duplicate detection, merge drafting and issue suggestions", "groom"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config_file, "Sectioned key=value config file")->check(CLI::ExistingFile);

    auto* fetch = app.add_subcommand("fetch", "Fetch the backlog and write it as JSON");
    add_source_options(fetch, o);
    fetch->add_option("--out", o.out, "Output file (default stdout)");

    auto* scan = app.add_subcommand("scan", "List duplicate candidates");
    add_source_options(scan, o);
    add_engine_options(scan, o);
    scan->add_option("--out", o.out, "Output file (default stdout)");

    auto* groom = app.add_subcommand("groom", "Detect, merge and apply without review");
    add_source_options(groom, o);
    add_engine_options(groom, o);
    add_chat_options(groom, o);
    groom->add_flag("--auto", o.auto_mode, "Accept every suggestion");
    groom->add_option("--out", o.out, "Write predicted pairs as CSV");
    groom->add_option("--truth", o.truth, "Labeled pairs CSV for scoring");
    groom->add_option("--description", o.description, "Project description");

    auto* evaluate = app.add_subcommand("evaluate", "Score predicted pairs against labeled pairs");
    evaluate->add_option("--predictions", o.predictions, "Predicted pairs (CSV or JSON)")->required();
    evaluate->add_option("--truth", o.truth, "Labeled pairs CSV")->required();
    evaluate->add_option("--time-seconds", o.time_seconds, "Session duration in seconds");
    evaluate->add_option("--format", o.format, "json or csv");
    evaluate->add_option("--participant", o.participant, "Row label");
    evaluate->add_option("--fixture", o.fixture, "Labeled backlog, bounds the issue universe");
    evaluate->add_flag("--matrix", o.show_matrix, "Print the confusion matrix on stderr");

    auto* serve = app.add_subcommand("serve", "Run the review API");
    add_source_options(serve, o);
    add_engine_options(serve, o);
    add_chat_options(serve, o);
    serve->add_option("--host", o.host, "Bind address");
    serve->add_option("--port", o.port, "Port (0 picks a free one)");
    serve->add_option("--static-dir", o.static_dir, "Review UI assets");
    serve->add_option("--truth", o.truth, "Labeled pairs CSV for session reports");
    serve->add_option("--description", o.description, "Project description");

    auto* suggest = app.add_subcommand("suggest", "Propose new backlog items");
    add_source_options(suggest, o);
    add_engine_options(suggest, o);
    add_chat_options(suggest, o);
    suggest->add_option("--prompt", o.prompt, "Extra instructions for the model");
    suggest->add_option("--max", o.max_suggestions, "Maximum number of suggestions");
    suggest->add_option("--description", o.description, "Project description");
    suggest->add_option("--out", o.out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*fetch) {
            return cmd_fetch(o, out);
        }
        if (*scan) {
            return cmd_scan(o, out);
        }
        if (*groom) {
            return cmd_groom(o, out, err);
        }
        if (*evaluate) {
            return cmd_evaluate(o, out, err);
        }
        if (*serve) {
            return cmd_serve(o, out, err);
        }
        return cmd_suggest(o, out);
    } catch (const PartialFailureError& e) {
        err << "error: " << e.what() << "\n" << to_json(e.receipt()).dump(2) << "\n";
        return kExitRuntime;
    } catch (const Error& e) {
        err << "error (" << error_code_name(e.code()) << "): " << e.what() << "\n";
        int code = exit_code_for(e.code());
        if (code == kExitConfig) {
            err << "run `groom --help` for usage\n";
        }
        return code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace groom
