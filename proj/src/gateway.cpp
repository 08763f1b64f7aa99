#include "groom/gateway.hpp"

#include "groom/json_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include <unistd.h>

namespace groom {

using json = nlohmann::json;

Timestamp system_now() {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

void validate(const GatewayConfig& config) {
    if (config.mode == GatewayMode::Fixture) {
        if (config.fixture_path.empty()) {
            throw Error(ErrorCode::ConfigError, "fixture mode needs a fixture path");
        }
        return;
    }
    if (config.base_url.empty()) {
        throw Error(ErrorCode::ConfigError, "REST mode needs a base URL");
    }
    if (config.project_key.empty()) {
        throw Error(ErrorCode::ConfigError, "REST mode needs a project key");
    }
    if (config.page_size == 0) {
        throw Error(ErrorCode::ConfigError, "page_size must be positive");
    }
}

std::string_view to_string(StepStatus status) {
    switch (status) {
    case StepStatus::Applied: return "Applied";
    case StepStatus::AlreadySatisfied: return "AlreadySatisfied";
    case StepStatus::Failed: return "Failed";
    }
    return "Failed";
}

bool ApplyReceipt::ok() const {
    return std::none_of(steps.begin(), steps.end(), [](const StepOutcome& s) { return s.status == StepStatus::Failed; });
}

BacklogSnapshot Gateway::fetch_backlog() {
    std::shared_lock lock(apply_lock_);
    return do_fetch();
}

ApplyReceipt Gateway::apply(const GroomingAction& action) {
    validate(action);
    std::unique_lock lock(apply_lock_);
    auto receipt = do_apply(action);
    if (!receipt.ok()) {
        std::string failed;
        for (const auto& s : receipt.steps) {
            if (s.status == StepStatus::Failed) {
                failed += (failed.empty() ? "" : "; ") + s.step + " " + s.target + ": " + s.detail;
            }
        }
        throw PartialFailureError("action partially failed: " + failed, std::move(receipt));
    }
    return receipt;
}

// ---------------------------------------------------------------------------
// Fixture mode

namespace {

std::string merged_comment(const std::string& survivor) {
    return "Merged into " + survivor;
}

json read_fixture(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::FixtureParseError, "cannot read fixture " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::FixtureParseError, "fixture " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("project_key") || !doc["project_key"].is_string() ||
        !doc.contains("issues") || !doc["issues"].is_array()) {
        throw Error(ErrorCode::FixtureParseError,
                    "fixture " + path.string() + " needs a string project_key and an issues array");
    }
    return doc;
}

void write_fixture_atomically(const std::filesystem::path& path, const json& doc) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    const std::string text = doc.dump(2) + "\n";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) {
        throw Error(ErrorCode::GatewayError, "cannot write " + tmp.string());
    }
    bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
    ok = std::fflush(f) == 0 && ok;
    ok = ::fsync(::fileno(f)) == 0 && ok;
    ok = std::fclose(f) == 0 && ok;
    if (!ok) {
        std::filesystem::remove(tmp);
        throw Error(ErrorCode::GatewayError, "failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

json* find_issue(json& doc, const std::string& key) {
    for (auto& issue : doc["issues"]) {
        if (issue.value("key", std::string{}) == key) {
            return &issue;
        }
    }
    return nullptr;
}

StepOutcome missing(const std::string& key, const std::string& step) {
    return {key, step, StepStatus::Failed, "issue not found"};
}

long numeric_suffix(const std::string& key) {
    auto dash = key.rfind('-');
    if (dash == std::string::npos || dash + 1 >= key.size()) {
        return -1;
    }
    try {
        std::size_t used = 0;
        long n = std::stol(key.substr(dash + 1), &used);
        return used == key.size() - dash - 1 ? n : -1;
    } catch (const std::exception&) {
        return -1;
    }
}

}  // namespace

FixtureGateway::FixtureGateway(std::filesystem::path path, std::string expected_project, Clock clock)
    : path_(std::move(path)), expected_project_(std::move(expected_project)), clock_(std::move(clock)) {}

BacklogSnapshot FixtureGateway::do_fetch() {
    json doc = read_fixture(path_);
    BacklogSnapshot snapshot;
    snapshot.project_key = doc["project_key"].get<std::string>();
    if (!expected_project_.empty() && expected_project_ != snapshot.project_key) {
        throw Error(ErrorCode::ProjectNotFound, "fixture " + path_.string() + " holds project " +
                                                    snapshot.project_key + ", not " + expected_project_);
    }
    try {
        for (const auto& item : doc["issues"]) {
            snapshot.issues.push_back(issue_from_json(item));
        }
        snapshot = normalize(std::move(snapshot));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::FixtureParseError, "fixture " + path_.string() + ": " + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::FixtureParseError, "fixture " + path_.string() + ": " + e.what());
    }
    snapshot.fetched_at = clock_();
    return snapshot;
}

ApplyReceipt FixtureGateway::do_apply(const GroomingAction& action) {
    json doc = read_fixture(path_);
    const Timestamp now_ts = clock_();
    const std::string now = format_timestamp(now_ts);
    // updated_at never precedes created_at, even under a skewed clock.
    auto touch = [&](json& issue) {
        Timestamp stamp = now_ts;
        try {
            stamp = std::max(stamp, parse_timestamp(issue.value("created_at", std::string{})));
        } catch (const Error&) {
        }
        issue["updated_at"] = format_timestamp(stamp);
    };
    ApplyReceipt receipt;
    receipt.kind = action.kind();
    bool changed = false;

    auto set_status = [&](json& issue, const std::string& key, IssueStatus target) {
        if (issue.value("status", std::string{}) == to_string(target)) {
            receipt.steps.push_back({key, "transition", StepStatus::AlreadySatisfied, std::string(to_string(target))});
            return;
        }
        issue["status"] = to_string(target);
        touch(issue);
        changed = true;
        receipt.steps.push_back({key, "transition", StepStatus::Applied, std::string(to_string(target))});
    };

    if (const auto* merge = std::get_if<MergeClusterPayload>(&action.payload)) {
        if (json* survivor = find_issue(doc, merge->survivor)) {
            if (survivor->value("summary", std::string{}) == merge->summary &&
                survivor->value("description", std::string{}) == merge->description) {
                receipt.steps.push_back({merge->survivor, "update_issue", StepStatus::AlreadySatisfied, ""});
            } else {
                (*survivor)["summary"] = merge->summary;
                (*survivor)["description"] = merge->description;
                touch(*survivor);
                changed = true;
                receipt.steps.push_back({merge->survivor, "update_issue", StepStatus::Applied, ""});
            }
        } else {
            receipt.steps.push_back(missing(merge->survivor, "update_issue"));
        }

        for (const auto& key : merge->absorbed) {
            json* issue = find_issue(doc, key);
            if (!issue) {
                receipt.steps.push_back(missing(key, "link_duplicate"));
                continue;
            }
            json& links = (*issue)["links"];
            if (!links.is_array()) {
                links = json::array();
            }
            const json link{{"type", "Duplicate"}, {"target", merge->survivor}};
            if (std::find(links.begin(), links.end(), link) != links.end()) {
                receipt.steps.push_back({key, "link_duplicate", StepStatus::AlreadySatisfied, merge->survivor});
            } else {
                links.push_back(link);
                touch(*issue);
                changed = true;
                receipt.steps.push_back({key, "link_duplicate", StepStatus::Applied, merge->survivor});
            }

            json& comments = (*issue)["comments"];
            if (!comments.is_array()) {
                comments = json::array();
            }
            const std::string note = merged_comment(merge->survivor);
            if (std::find(comments.begin(), comments.end(), note) != comments.end()) {
                receipt.steps.push_back({key, "comment", StepStatus::AlreadySatisfied, note});
            } else {
                comments.push_back(note);
                changed = true;
                receipt.steps.push_back({key, "comment", StepStatus::Applied, note});
            }
            set_status(*issue, key, IssueStatus::Closed);
        }
    } else if (const auto* create = std::get_if<CreateIssuePayload>(&action.payload)) {
        const std::string project = doc["project_key"].get<std::string>();
        long max_suffix = 0;
        for (const auto& issue : doc["issues"]) {
            max_suffix = std::max(max_suffix, numeric_suffix(issue.value("key", std::string{})));
        }
        const std::string key = project + "-" + std::to_string(max_suffix + 1);
        doc["issues"].push_back({{"key", key},
                                 {"summary", create->summary},
                                 {"description", create->description},
                                 {"status", "Open"},
                                 {"labels", create->labels},
                                 {"created_at", now},
                                 {"updated_at", now},
                                 {"comments", json::array()}});
        changed = true;
        receipt.created_key = key;
        receipt.steps.push_back({key, "create_issue", StepStatus::Applied, create->summary});
    } else if (const auto* update = std::get_if<UpdateStatusPayload>(&action.payload)) {
        if (json* issue = find_issue(doc, update->key)) {
            set_status(*issue, update->key, update->target);
        } else {
            receipt.steps.push_back(missing(update->key, "transition"));
        }
    }

    if (changed) {
        write_fixture_atomically(path_, doc);
    }
    return receipt;
}

// ---------------------------------------------------------------------------
// REST mode

namespace {

void collect_adf_text(const json& node, std::string& out) {
    if (node.is_string()) {
        out += node.get<std::string>();
        return;
    }
    if (!node.is_object()) {
        return;
    }
    const auto type = node.value("type", std::string{});
    if (type == "text") {
        out += node.value("text", std::string{});
        return;
    }
    if (type == "hardBreak") {
        out += '\n';
        return;
    }
    if (auto it = node.find("content"); it != node.end() && it->is_array()) {
        bool first = true;
        for (const auto& child : *it) {
            const auto child_type = child.is_object() ? child.value("type", std::string{}) : std::string{};
            const bool block = child_type == "paragraph" || child_type == "heading" || child_type == "codeBlock" ||
                               child_type == "bulletList" || child_type == "orderedList" || child_type == "listItem";
            if (block && !first) {
                out += '\n';
            }
            collect_adf_text(child, out);
            first = false;
        }
    }
}

std::string lower_ascii(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

std::string adf_to_text(const json& node) {
    if (node.is_null()) {
        return {};
    }
    std::string out;
    collect_adf_text(node, out);
    return out;
}

json text_to_adf(const std::string& text) {
    json content = json::array();
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        json paragraph{{"type", "paragraph"}, {"content", json::array()}};
        if (!line.empty()) {
            paragraph["content"].push_back({{"type", "text"}, {"text", line}});
        }
        content.push_back(std::move(paragraph));
    }
    return json{{"type", "doc"}, {"version", 1}, {"content", content}};
}

IssueStatus map_jira_status(const std::string& name, const std::string& category_key) {
    const auto n = lower_ascii(name);
    if (n == "open" || n == "to do" || n == "todo" || n == "backlog" || n == "new" || n == "reopened" ||
        n == "selected for development") {
        return IssueStatus::Open;
    }
    if (n == "in progress" || n == "inprogress" || n == "in review" || n == "in development") {
        return IssueStatus::InProgress;
    }
    if (n == "done" || n == "resolved") {
        return IssueStatus::Done;
    }
    if (n == "closed") {
        return IssueStatus::Closed;
    }
    if (category_key == "indeterminate") {
        return IssueStatus::InProgress;
    }
    if (category_key == "done") {
        return IssueStatus::Done;
    }
    return IssueStatus::Open;
}

RestGateway::RestGateway(GatewayConfig config, std::shared_ptr<HttpTransport> transport, RetryPolicy retry,
                         Clock clock)
    : config_(std::move(config)), transport_(std::move(transport)), retry_(std::move(retry)), clock_(std::move(clock)) {
    validate(config_);
    while (!config_.base_url.empty() && config_.base_url.back() == '/') {
        config_.base_url.pop_back();
    }
}

HttpResponse RestGateway::call(const std::string& method, const std::string& path, const std::string& body) {
    HttpRequest request{method, config_.base_url + path, {{"Accept", "application/json"}}, body};
    if (!body.empty()) {
        request.headers["Content-Type"] = "application/json";
    }
    if (!config_.auth.token.empty()) {
        if (config_.auth.scheme == AuthScheme::Bearer) {
            request.headers["Authorization"] = "Bearer " + config_.auth.token;
        } else {
            request.headers["Authorization"] = basic_auth_header(config_.auth.user, config_.auth.token);
        }
    }
    int attempts = 0;
    auto response = send_with_retry(*transport_, request, retry_, &attempts);
    switch (response.status) {
    case 0:
        throw Error(ErrorCode::GatewayError,
                    "cannot reach " + config_.base_url + " (" + response.transport_error + ") after " +
                        std::to_string(attempts) + " attempts");
    case 401:
    case 403:
        throw Error(ErrorCode::AuthFailed, "tracker rejected the credentials (" + std::to_string(response.status) + ")");
    case 429:
        throw Error(ErrorCode::RateLimited, "tracker kept rate limiting after " + std::to_string(attempts) + " attempts");
    default:
        break;
    }
    if (response.status >= 500) {
        throw Error(ErrorCode::GatewayError, method + " " + path + " failed with " + std::to_string(response.status));
    }
    return response;
}

json RestGateway::call_json(const std::string& method, const std::string& path, const std::string& body) {
    auto response = call(method, path, body);
    if (response.status == 404) {
        throw Error(ErrorCode::UnknownIssueKey, method + " " + path + " returned 404");
    }
    if (response.status >= 400) {
        throw Error(ErrorCode::GatewayError,
                    method + " " + path + " failed with " + std::to_string(response.status) + ": " +
                        response.body.substr(0, 200));
    }
    if (response.body.empty()) {
        return json::object();
    }
    try {
        return json::parse(response.body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::GatewayError, method + " " + path + " returned invalid JSON: " + e.what());
    }
}

BacklogSnapshot RestGateway::do_fetch() {
    BacklogSnapshot snapshot;
    snapshot.project_key = config_.project_key;
    const std::string jql = url_encode("project = \"" + config_.project_key + "\" ORDER BY key ASC");
    std::size_t start = 0;
    while (true) {
        const std::string path = "/rest/api/3/search?jql=" + jql + "&startAt=" + std::to_string(start) +
                                 "&maxResults=" + std::to_string(config_.page_size) +
                                 "&fields=summary,description,status,labels,created,updated";
        auto response = call("GET", path);
        if (response.status == 404 || (response.status == 400 && response.body.find("project") != std::string::npos)) {
            throw Error(ErrorCode::ProjectNotFound, "project " + config_.project_key + " not found");
        }
        if (response.status != 200) {
            throw Error(ErrorCode::GatewayError, "search failed with " + std::to_string(response.status));
        }
        json page;
        try {
            page = json::parse(response.body);
            const auto& issues = page.at("issues");
            for (const auto& raw : issues) {
                const auto& fields = raw.at("fields");
                Issue issue;
                issue.key = raw.at("key").get<std::string>();
                issue.summary = fields.value("summary", std::string{});
                issue.description = adf_to_text(fields.value("description", json(nullptr)));
                const auto& status = fields.value("status", json::object());
                issue.status = map_jira_status(
                    status.value("name", std::string{}),
                    status.value("statusCategory", json::object()).value("key", std::string{}));
                if (auto labels = fields.find("labels"); labels != fields.end() && labels->is_array()) {
                    issue.labels = labels->get<std::set<std::string>>();
                }
                issue.created_at = parse_timestamp(fields.at("created").get<std::string>());
                issue.updated_at = parse_timestamp(fields.at("updated").get<std::string>());
                snapshot.issues.push_back(std::move(issue));
            }
            const auto total = page.value("total", std::size_t{0});
            start += issues.size();
            if (issues.empty() || start >= total) {
                break;
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::GatewayError, std::string("unexpected search response: ") + e.what());
        }
    }
    // Pages can overlap when issues are created mid-fetch; keep the first copy.
    std::sort(snapshot.issues.begin(), snapshot.issues.end(),
              [](const Issue& x, const Issue& y) { return x.key < y.key; });
    snapshot.issues.erase(std::unique(snapshot.issues.begin(), snapshot.issues.end(),
                                      [](const Issue& x, const Issue& y) { return x.key == y.key; }),
                          snapshot.issues.end());
    snapshot = normalize(std::move(snapshot));
    snapshot.fetched_at = clock_();
    return snapshot;
}

StepOutcome RestGateway::transition(const std::string& key, IssueStatus target, std::optional<IssueStatus> current) {
    if (current && *current == target) {
        return {key, "transition", StepStatus::AlreadySatisfied, std::string(to_string(target))};
    }
    try {
        auto options = call_json("GET", "/rest/api/3/issue/" + key + "/transitions");
        for (const auto& t : options.value("transitions", json::array())) {
            const auto& to = t.value("to", json::object());
            auto mapped = map_jira_status(to.value("name", t.value("name", std::string{})),
                                          to.value("statusCategory", json::object()).value("key", std::string{}));
            if (mapped == target) {
                json body{{"transition", {{"id", t.at("id")}}}};
                call_json("POST", "/rest/api/3/issue/" + key + "/transitions", body.dump());
                return {key, "transition", StepStatus::Applied, std::string(to_string(target))};
            }
        }
        return {key, "transition", StepStatus::Failed, "no transition leads to " + std::string(to_string(target))};
    } catch (const Error& e) {
        return {key, "transition", StepStatus::Failed, e.what()};
    }
}

ApplyReceipt RestGateway::do_apply(const GroomingAction& action) {
    ApplyReceipt receipt;
    receipt.kind = action.kind();

    auto current_status = [&](const json& issue) {
        const auto& status = issue.at("fields").value("status", json::object());
        return map_jira_status(status.value("name", std::string{}),
                               status.value("statusCategory", json::object()).value("key", std::string{}));
    };

    if (const auto* merge = std::get_if<MergeClusterPayload>(&action.payload)) {
        try {
            auto survivor = call_json("GET", "/rest/api/3/issue/" + merge->survivor + "?fields=summary,description");
            const auto& fields = survivor.at("fields");
            if (fields.value("summary", std::string{}) == merge->summary &&
                adf_to_text(fields.value("description", json(nullptr))) == merge->description) {
                receipt.steps.push_back({merge->survivor, "update_issue", StepStatus::AlreadySatisfied, ""});
            } else {
                json body{{"fields", {{"summary", merge->summary}, {"description", text_to_adf(merge->description)}}}};
                call_json("PUT", "/rest/api/3/issue/" + merge->survivor, body.dump());
                receipt.steps.push_back({merge->survivor, "update_issue", StepStatus::Applied, ""});
            }
        } catch (const Error& e) {
            receipt.steps.push_back({merge->survivor, "update_issue", StepStatus::Failed, e.what()});
        }

        for (const auto& key : merge->absorbed) {
            json issue;
            try {
                issue = call_json("GET", "/rest/api/3/issue/" + key + "?fields=status,issuelinks,comment");
            } catch (const Error& e) {
                receipt.steps.push_back({key, "link_duplicate", StepStatus::Failed, e.what()});
                continue;
            }
            const auto& fields = issue.at("fields");

            bool linked = false;
            for (const auto& link : fields.value("issuelinks", json::array())) {
                const auto type = link.value("type", json::object()).value("name", std::string{});
                const auto outward = link.value("outwardIssue", json::object()).value("key", std::string{});
                const auto inward = link.value("inwardIssue", json::object()).value("key", std::string{});
                if (type == "Duplicate" && (outward == merge->survivor || inward == merge->survivor)) {
                    linked = true;
                }
            }
            if (linked) {
                receipt.steps.push_back({key, "link_duplicate", StepStatus::AlreadySatisfied, merge->survivor});
            } else {
                try {
                    json body{{"type", {{"name", "Duplicate"}}},
                              {"inwardIssue", {{"key", key}}},
                              {"outwardIssue", {{"key", merge->survivor}}}};
                    call_json("POST", "/rest/api/3/issueLink", body.dump());
                    receipt.steps.push_back({key, "link_duplicate", StepStatus::Applied, merge->survivor});
                } catch (const Error& e) {
                    receipt.steps.push_back({key, "link_duplicate", StepStatus::Failed, e.what()});
                }
            }

            const std::string note = merged_comment(merge->survivor);
            bool commented = false;
            for (const auto& c : fields.value("comment", json::object()).value("comments", json::array())) {
                if (adf_to_text(c.value("body", json(nullptr))) == note) {
                    commented = true;
                }
            }
            if (commented) {
                receipt.steps.push_back({key, "comment", StepStatus::AlreadySatisfied, note});
            } else {
                try {
                    call_json("POST", "/rest/api/3/issue/" + key + "/comment", json{{"body", text_to_adf(note)}}.dump());
                    receipt.steps.push_back({key, "comment", StepStatus::Applied, note});
                } catch (const Error& e) {
                    receipt.steps.push_back({key, "comment", StepStatus::Failed, e.what()});
                }
            }

            receipt.steps.push_back(transition(key, IssueStatus::Closed, current_status(issue)));
        }
    } else if (const auto* create = std::get_if<CreateIssuePayload>(&action.payload)) {
        try {
            json body{{"fields",
                       {{"project", {{"key", config_.project_key}}},
                        {"summary", create->summary},
                        {"description", text_to_adf(create->description)},
                        {"issuetype", {{"name", "Task"}}},
                        {"labels", create->labels}}}};
            auto created = call_json("POST", "/rest/api/3/issue", body.dump());
            receipt.created_key = created.at("key").get<std::string>();
            receipt.steps.push_back({*receipt.created_key, "create_issue", StepStatus::Applied, create->summary});
        } catch (const std::exception& e) {
            receipt.steps.push_back({"", "create_issue", StepStatus::Failed, e.what()});
        }
    } else if (const auto* update = std::get_if<UpdateStatusPayload>(&action.payload)) {
        try {
            auto issue = call_json("GET", "/rest/api/3/issue/" + update->key + "?fields=status");
            receipt.steps.push_back(transition(update->key, update->target, current_status(issue)));
        } catch (const Error& e) {
            receipt.steps.push_back({update->key, "transition", StepStatus::Failed, e.what()});
        }
    }
    return receipt;
}

std::shared_ptr<Gateway> make_gateway(const GatewayConfig& config, std::shared_ptr<HttpTransport> transport) {
    validate(config);
    if (config.mode == GatewayMode::Fixture) {
        return std::make_shared<FixtureGateway>(config.fixture_path, config.project_key);
    }
    if (!transport) {
        transport = std::make_shared<HttplibTransport>(config.request_timeout);
    }
    return std::make_shared<RestGateway>(config, std::move(transport));
}

}  // namespace groom
