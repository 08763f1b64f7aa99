#include "groom/error.hpp"
#include "groom/review.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include <thread>

using namespace groom;
using json = nlohmann::json;

namespace {

class ServerTest : public ::testing::Test {
protected:
    void SetUp() override {
        fixture_ = dir_ / "backlog.json";
        std::filesystem::copy_file(test::fixture_dir() / "backlog51.json", fixture_);
        test::write_file(dir_ / "index.html", "<html>review</html>");

        ReviewServiceDeps deps;
        deps.embedder = std::make_shared<Embedder>(std::make_shared<LocalHashProvider>(), EmbeddingProviderConfig{});
        deps.chat = std::make_shared<MockChatProvider>();
        deps.prompts = std::make_shared<PromptLibrary>(PromptLibrary::default_directory());
        deps.truth = load_ground_truth(test::fixture_dir() / "backlog51_truth.csv");
        auto service = std::make_shared<ReviewService>(deps);
        auto factory = [this](const json& request) -> std::shared_ptr<Gateway> {
            if (!request.contains("fixture")) {
                throw Error(ErrorCode::InvalidArgument, "fixture required");
            }
            return std::make_shared<FixtureGateway>(request.at("fixture").get<std::string>());
        };
        server_ = std::make_unique<ReviewServer>(service, factory, EngineConfig{}, "Online shop");
        server_->mount_static(dir_.path().string());
        ASSERT_TRUE(server_->bind("127.0.0.1", 0));
        thread_ = std::thread([this] { server_->listen(); });
        client_ = std::make_unique<httplib::Client>("127.0.0.1", server_->port());
        client_->set_keep_alive(false);
        for (int i = 0; i < 100 && !client_->Get("/api/sessions"); ++i) {
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
    }

    void TearDown() override {
        server_->stop();
        thread_.join();
    }

    std::pair<int, json> post(const std::string& path, const json& body) {
        auto res = client_->Post(path, body.dump(), "application/json");
        if (!res) {
            ADD_FAILURE() << "no response for " << path;
            return {0, nullptr};
        }
        return {res->status, res->body.empty() ? json(nullptr) : json::parse(res->body)};
    }

    std::pair<int, json> get(const std::string& path) {
        auto res = client_->Get(path);
        if (!res) {
            ADD_FAILURE() << "no response for " << path;
            return {0, nullptr};
        }
        return {res->status, json::parse(res->body)};
    }

    std::string start(const std::string& mode = "Interactive") {
        auto [status, body] = post("/api/sessions", {{"mode", mode}, {"fixture", fixture_.string()}});
        EXPECT_EQ(status, 201);
        return body.value("session_id", std::string{});
    }

    test::TempDir dir_;
    std::filesystem::path fixture_;
    std::unique_ptr<ReviewServer> server_;
    std::thread thread_;
    std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST_F(ServerTest, ListStartsEmpty) {
    auto [status, body] = get("/api/sessions");
    EXPECT_EQ(status, 200);
    EXPECT_EQ(body, json::array());
}

TEST_F(ServerTest, CreateSessionReturnsCandidates) {
    auto [status, body] = post("/api/sessions", {{"fixture", fixture_.string()}});
    EXPECT_EQ(status, 201);
    EXPECT_EQ(body["session_id"], "session-1");
    EXPECT_EQ(body["mode"], "Interactive");
    EXPECT_EQ(body["issue_count"], 51);
    EXPECT_EQ(body["candidates"].size(), 41u);
    EXPECT_EQ(body["candidates"][0]["status"], "Proposed");

    auto [ls, list] = get("/api/sessions");
    EXPECT_EQ(ls, 200);
    ASSERT_EQ(list.size(), 1u);
    EXPECT_EQ(list[0]["candidate_count"], 41);
    EXPECT_EQ(list[0]["applied"], false);

    auto [cs, candidates] = get("/api/sessions/session-1/candidates");
    EXPECT_EQ(cs, 200);
    EXPECT_EQ(candidates.size(), 41u);
}

TEST_F(ServerTest, BadRequestsMapToStatuses) {
    EXPECT_EQ(get("/api/sessions/nope").first, 404);
    auto [s1, b1] = post("/api/sessions", {{"fixture", fixture_.string()}, {"threshold", 1.5}});
    EXPECT_EQ(s1, 400);
    EXPECT_EQ(b1["error"], "invalid_argument");
    EXPECT_TRUE(b1["message"].is_string());
    EXPECT_EQ(post("/api/sessions", {{"mode", "Sideways"}, {"fixture", fixture_.string()}}).first, 400);
    EXPECT_EQ(post("/api/sessions", json::object()).first, 400);

    auto raw = client_->Post("/api/sessions", "{not json", "application/json");
    ASSERT_TRUE(raw);
    EXPECT_EQ(raw->status, 400);

    auto id = start();
    auto [s2, b2] = post("/api/sessions/" + id + "/decisions", {{"target", "X~Y"}, {"verdict", "Accept"}});
    EXPECT_EQ(s2, 404);
    EXPECT_EQ(b2["error"], "unknown_target");
    auto target = get("/api/sessions/" + id).second["candidates"][0]["id"].get<std::string>();
    auto [s3, b3] = post("/api/sessions/" + id + "/decisions", {{"target", target}, {"verdict", "Modify"}});
    EXPECT_EQ(s3, 400);
    EXPECT_EQ(b3["error"], "missing_edited_payload");
    EXPECT_EQ(post("/api/sessions/" + id + "/decisions", {{"target", target}, {"verdict", "Maybe"}}).first, 400);
    auto [s4, b4] = post("/api/sessions/" + id + "/apply", json::object());
    EXPECT_EQ(s4, 422);
    EXPECT_EQ(b4["error"], "nothing_to_apply");
}

TEST_F(ServerTest, DecideSuggestApplyReport) {
    auto id = start();
    auto candidates = get("/api/sessions/" + id + "/candidates").second;
    auto first = candidates[0]["id"].get<std::string>();
    auto second = candidates[1]["id"].get<std::string>();
    auto [s1, b1] = post("/api/sessions/" + id + "/decisions", {{"target", first}, {"verdict", "Accept"}});
    EXPECT_EQ(s1, 200);
    EXPECT_EQ(b1, (json{{"target", first}, {"status", "Accepted"}}));
    auto [s2, b2] = post("/api/sessions/" + id + "/decisions",
                         {{"target", second}, {"verdict", "Modify"}, {"edited", {{"summary", "T"}, {"description", "D"}}}});
    EXPECT_EQ(s2, 200);
    EXPECT_EQ(b2["status"], "Modified");

    auto [s3, suggestions] = post("/api/sessions/" + id + "/suggestions", {{"prompt", "gift cards"}, {"max", 2}});
    EXPECT_EQ(s3, 200);
    ASSERT_EQ(suggestions.size(), 2u);
    EXPECT_EQ(suggestions[0]["id"], "s-1");
    EXPECT_EQ(suggestions[0]["status"], "Proposed");
    post("/api/sessions/" + id + "/decisions", {{"target", "s-1"}, {"verdict", "Accept"}});

    auto [s4, applied] = post("/api/sessions/" + id + "/apply", json::object());
    EXPECT_EQ(s4, 200);
    EXPECT_FALSE(applied["receipts"].empty());
    EXPECT_TRUE(applied["time_to_completion_seconds"].is_number());

    auto [s5, again] = post("/api/sessions/" + id + "/apply", json::object());
    EXPECT_EQ(s5, 409);
    EXPECT_EQ(again["error"], "session_already_applied");

    auto [s6, report] = get("/api/sessions/" + id + "/report");
    EXPECT_EQ(s6, 200);
    EXPECT_EQ(report["applied"], true);
    EXPECT_EQ(report["metrics"]["FP"], 0);
    EXPECT_EQ(report["metrics"]["TP"].get<int>(), static_cast<int>(report["predicted_pairs"].size()));
    EXPECT_EQ(report["confusion_matrix"]["tp"].get<int>() + report["confusion_matrix"]["fp"].get<int>() +
                  report["confusion_matrix"]["fn"].get<int>() + report["confusion_matrix"]["tn"].get<int>(),
              1275);

    auto fixture = json::parse(test::read_file(fixture_));
    bool created = false;
    for (const auto& issue : fixture["issues"]) {
        created = created || issue["summary"] == "Follow up: gift cards";
    }
    EXPECT_TRUE(created);
}

TEST_F(ServerTest, ServesStaticFiles) {
    auto res = client_->Get("/index.html");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->body, "<html>review</html>");
}
