#include "groom/review.hpp"

#include "groom/error.hpp"
#include "groom/json_io.hpp"

#include <httplib.h>

namespace groom {

using json = nlohmann::json;

struct ReviewServer::Impl {
    std::shared_ptr<ReviewService> service;
    GatewayFactory gateway_factory;
    EngineConfig defaults;
    std::string project_description;
    httplib::Server server;
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, json{{"error", code}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
    if (req.body.find_first_not_of(" \t\r\n") == std::string::npos) {
        return json::object();
    }
    try {
        auto body = json::parse(req.body);
        if (!body.is_object()) {
            throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
        }
        return body;
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("malformed JSON body: ") + e.what());
    }
}

template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const PartialFailureError& e) {
            send_json(res, http_status_for(e.code()),
                      json{{"error", error_code_name(e.code())}, {"message", e.what()}, {"receipt", to_json(e.receipt())}});
        } catch (const Error& e) {
            send_error(res, http_status_for(e.code()), error_code_name(e.code()), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, error_code_name(ErrorCode::InvalidArgument), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

}  // namespace

ReviewServer::ReviewServer(std::shared_ptr<ReviewService> service, GatewayFactory gateway_factory,
                           EngineConfig defaults, std::string project_description)
    : impl_(std::make_unique<Impl>()) {
    impl_->service = std::move(service);
    impl_->gateway_factory = std::move(gateway_factory);
    impl_->defaults = defaults;
    impl_->project_description = std::move(project_description);

    auto& srv = impl_->server;
    auto* impl = impl_.get();
    // No SO_REUSEPORT: a second server on a taken port must fail to bind.
    srv.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    srv.Get("/api/sessions", guarded([impl](const httplib::Request&, httplib::Response& res) {
                json out = json::array();
                for (const auto& id : impl->service->list()) {
                    auto s = impl->service->get(id);
                    out.push_back({{"session_id", s.id},
                                   {"mode", to_string(s.mode)},
                                   {"project_key", s.snapshot.project_key},
                                   {"candidate_count", s.candidates.size()},
                                   {"started_at", format_timestamp(s.started_at)},
                                   {"applied", s.applied()}});
                }
                send_json(res, 200, out);
            }));

    srv.Post("/api/sessions", guarded([impl](const httplib::Request& req, httplib::Response& res) {
                 auto body = parse_body(req);
                 auto config = impl->defaults;
                 if (body.contains("threshold")) {
                     config.duplicate_threshold = body.at("threshold").get<double>();
                 }
                 if (body.contains("redundancy_threshold")) {
                     config.new_issue_redundancy_threshold = body.at("redundancy_threshold").get<double>();
                 }
                 validate(config);
                 auto mode = parse_session_mode(body.value("mode", std::string("Interactive")));
                 auto description = body.value("project_description", impl->project_description);
                 auto gateway = impl->gateway_factory(body);
                 auto id = impl->service->start_session(std::move(gateway), config, mode, description);
                 send_json(res, 201, to_json(impl->service->get(id)));
             }));

    srv.Get(R"(/api/sessions/([^/]+))", guarded([impl](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, to_json(impl->service->get(req.matches[1])));
            }));

    srv.Get(R"(/api/sessions/([^/]+)/candidates)",
            guarded([impl](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, to_json(impl->service->get(req.matches[1])).at("candidates"));
            }));

    srv.Post(R"(/api/sessions/([^/]+)/decisions)",
             guarded([impl](const httplib::Request& req, httplib::Response& res) {
                 auto body = parse_body(req);
                 Decision d;
                 d.target = body.at("target").get<std::string>();
                 d.verdict = parse_verdict(body.at("verdict").get<std::string>());
                 d.actor = body.value("actor", std::string("user"));
                 if (body.contains("edited") && body.at("edited").is_object()) {
                     const auto& e = body.at("edited");
                     d.edited = MergeText{e.value("summary", std::string()), e.value("description", std::string())};
                 }
                 auto status = impl->service->record_decision(req.matches[1], d);
                 send_json(res, 200, json{{"target", d.target}, {"status", to_string(status)}});
             }));

    srv.Post(R"(/api/sessions/([^/]+)/suggestions)",
             guarded([impl](const httplib::Request& req, httplib::Response& res) {
                 auto body = parse_body(req);
                 auto max = body.value("max", std::size_t{5});
                 auto added = impl->service->request_suggestions(req.matches[1], body.value("prompt", std::string()), max);
                 json out = json::array();
                 for (const auto& item : added) {
                     out.push_back(to_json(item));
                 }
                 send_json(res, 200, out);
             }));

    srv.Post(R"(/api/sessions/([^/]+)/apply)", guarded([impl](const httplib::Request& req, httplib::Response& res) {
                 auto result = impl->service->apply(req.matches[1]);
                 json receipts = json::array();
                 for (const auto& r : result.receipts) {
                     receipts.push_back(to_json(r));
                 }
                 send_json(res, 200,
                           json{{"receipts", receipts}, {"time_to_completion_seconds", result.time_to_completion_seconds}});
             }));

    srv.Get(R"(/api/sessions/([^/]+)/report)", guarded([impl](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, impl->service->report(req.matches[1]));
            }));
}

ReviewServer::~ReviewServer() {
    stop();
}

void ReviewServer::mount_static(const std::string& directory) {
    if (!impl_->server.set_mount_point("/", directory)) {
        throw Error(ErrorCode::ConfigError, "static directory " + directory + " does not exist");
    }
}

bool ReviewServer::bind(const std::string& host, int port) {
    if (port == 0) {
        int chosen = impl_->server.bind_to_any_port(host);
        if (chosen <= 0) {
            return false;
        }
        port_ = chosen;
        return true;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        return false;
    }
    port_ = port;
    return true;
}

void ReviewServer::listen() {
    impl_->server.listen_after_bind();
}

void ReviewServer::stop() {
    if (impl_) {
        impl_->server.stop();
    }
}

}  // namespace groom
