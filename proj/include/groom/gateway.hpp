#pragma once

#include "groom/error.hpp"
#include "groom/http.hpp"
#include "groom/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace groom {

using Clock = std::function<Timestamp()>;

/// Wall clock truncated to milliseconds.
Timestamp system_now();

enum class GatewayMode { Rest, Fixture };

enum class AuthScheme { Bearer, Basic };

struct GatewayAuth {
    AuthScheme scheme = AuthScheme::Bearer;
    std::string user;   // Basic only
    std::string token;  // bearer token or API token; normally JIRA_TOKEN
};

struct GatewayConfig {
    GatewayMode mode = GatewayMode::Fixture;
    std::string base_url;     // Rest
    std::string project_key;  // required for Rest; optional check for Fixture
    GatewayAuth auth;         // Rest
    std::filesystem::path fixture_path;  // Fixture
    std::size_t page_size = 50;
    std::chrono::milliseconds request_timeout{30000};
};

/// Throws Error(ConfigError) when a field required by the active mode is missing.
void validate(const GatewayConfig& config);

enum class StepStatus { Applied, AlreadySatisfied, Failed };

std::string_view to_string(StepStatus status);

struct StepOutcome {
    std::string target;  // issue key the step touched
    std::string step;    // update_issue, link_duplicate, comment, transition, create_issue
    StepStatus status = StepStatus::Applied;
    std::string detail;
};

struct ApplyReceipt {
    ActionKind kind = ActionKind::MergeCluster;
    std::vector<StepOutcome> steps;
    std::optional<std::string> created_key;

    bool ok() const;
};

/// Raised when some steps of an action failed. The receipt records which
/// steps went through; re-applying the action is safe.
class PartialFailureError : public Error {
public:
    PartialFailureError(const std::string& message, ApplyReceipt receipt)
        : Error(ErrorCode::PartialFailure, message), receipt_(std::move(receipt)) {}

    const ApplyReceipt& receipt() const noexcept { return receipt_; }

private:
    ApplyReceipt receipt_;
};

/// Tracker access. Fetches may overlap each other; an apply excludes
/// everything else on the same gateway instance.
class Gateway {
public:
    virtual ~Gateway() = default;

    BacklogSnapshot fetch_backlog();

    /// Validates the action, applies it and returns the per-step receipt.
    /// Throws PartialFailureError when any step fails.
    ApplyReceipt apply(const GroomingAction& action);

protected:
    virtual BacklogSnapshot do_fetch() = 0;
    virtual ApplyReceipt do_apply(const GroomingAction& action) = 0;

private:
    std::shared_mutex apply_lock_;
};

/// Local JSON file standing in for a tracker. Mutations rewrite the file via
/// a temporary file and rename, so readers see the old or the new document.
class FixtureGateway final : public Gateway {
public:
    explicit FixtureGateway(std::filesystem::path path, std::string expected_project = {},
                            Clock clock = system_now);

    const std::filesystem::path& path() const noexcept { return path_; }

protected:
    BacklogSnapshot do_fetch() override;
    ApplyReceipt do_apply(const GroomingAction& action) override;

private:
    std::filesystem::path path_;
    std::string expected_project_;
    Clock clock_;
};

/// Jira Cloud REST v3 client. All endpoint paths and field names live here.
class RestGateway final : public Gateway {
public:
    RestGateway(GatewayConfig config, std::shared_ptr<HttpTransport> transport, RetryPolicy retry = {},
                Clock clock = system_now);

protected:
    BacklogSnapshot do_fetch() override;
    ApplyReceipt do_apply(const GroomingAction& action) override;

private:
    HttpResponse call(const std::string& method, const std::string& path, const std::string& body = {});
    nlohmann::json call_json(const std::string& method, const std::string& path, const std::string& body = {});
    StepOutcome transition(const std::string& key, IssueStatus target, std::optional<IssueStatus> current);

    GatewayConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
    Clock clock_;
};

std::shared_ptr<Gateway> make_gateway(const GatewayConfig& config, std::shared_ptr<HttpTransport> transport = nullptr);

/// Plain text of an Atlassian Document Format node; paragraphs become lines.
std::string adf_to_text(const nlohmann::json& node);
/// One ADF paragraph per input line.
nlohmann::json text_to_adf(const std::string& text);

/// Maps a tracker status name (and optional status category key) onto the
/// four workflow states. Unknown names fall back to the category.
IssueStatus map_jira_status(const std::string& name, const std::string& category_key = {});

}  // namespace groom
