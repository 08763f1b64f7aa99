#include "groom/error.hpp"
#include "groom/gateway.hpp"
#include "groom/genai.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <random>

using namespace groom;
using json = nlohmann::json;
using test::make_issue;

namespace {

const PromptLibrary& prompts() {
    static const PromptLibrary lib(PromptLibrary::default_directory());
    return lib;
}

Embedder local_embedder() {
    return Embedder(std::make_shared<LocalHashProvider>(), EmbeddingProviderConfig{});
}

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::InvalidArgument;
}

SuggestionRequest request_for(const BacklogSnapshot& s, std::string prompt = {}, std::size_t max = 5) {
    SuggestionRequest r;
    r.project_description = "Online shop";
    r.issue_digest = make_issue_digest(s);
    r.user_prompt = std::move(prompt);
    r.max_suggestions = max;
    return r;
}

}  // namespace

TEST(ParseModelOutput, ValidShapes) {
    EXPECT_TRUE(parse_model_output("[]").empty());
    auto one = parse_model_output(R"([{"summary":"S","description":"D","rationale":"R"}])");
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].summary, "S");
    EXPECT_EQ(one[0].description, "D");
    EXPECT_EQ(one[0].rationale, "R");
    auto extra = parse_model_output(R"([{"summary":"S","description":"","rationale":"","priority":3}])");
    EXPECT_EQ(extra.size(), 1u);
}

TEST(ParseModelOutput, RejectsBadShapes) {
    for (const char* raw : {R"({"summary":"S"})", "Sure! Here are some ideas.", "", "[1,2]",
                            R"([{"summary":"S","description":"D"}])", R"([{"summary":"","description":"D","rationale":"R"}])",
                            R"([{"summary":5,"description":"D","rationale":"R"}])", "[{\"summary\":\"S\""}) {
        EXPECT_THROW(parse_model_output(raw), MalformedOutputError) << raw;
    }
}

TEST(ParseModelOutput, TotalOnFuzzedInput) {
    std::mt19937 rng(1234);
    const std::string seed = R"([{"summary":"Add dark mode","description":"Theme toggle","rationale":"Users ask"}])";
    const std::string alphabet = "[]{}\",:\\ abcSURD0123456789\n\t";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    int ok = 0;
    for (int i = 0; i < 5000; ++i) {
        std::string s = seed;
        std::uniform_int_distribution<int> edits(1, 6);
        for (int e = edits(rng); e > 0; --e) {
            std::uniform_int_distribution<std::size_t> pos(0, s.size());
            auto p = pos(rng);
            switch (rng() % 3) {
            case 0: s.insert(s.begin() + p, alphabet[pick(rng)]); break;
            case 1: if (p < s.size()) s.erase(s.begin() + p); break;
            default: if (p < s.size()) s[p] = alphabet[pick(rng)]; break;
            }
        }
        try {
            auto out = parse_model_output(s);
            for (const auto& item : out) {
                EXPECT_FALSE(item.summary.empty());
            }
            ++ok;
        } catch (const MalformedOutputError&) {
        } catch (...) {
            ADD_FAILURE() << "parser threw something other than MalformedOutputError for: " << s;
        }
    }
    std::uniform_int_distribution<int> byte(0, 255);
    for (int i = 0; i < 2000; ++i) {
        std::string s(rng() % 64, '\0');
        for (auto& c : s) {
            c = static_cast<char>(byte(rng));
        }
        try {
            parse_model_output(s);
            parse_merge_output(s);
        } catch (const MalformedOutputError&) {
        } catch (...) {
            ADD_FAILURE() << "non-contract exception on random bytes";
        }
    }
}

TEST(ParseMergeOutput, Shapes) {
    auto m = parse_merge_output(R"({"summary":"S","description":"D"})");
    EXPECT_EQ(m.summary, "S");
    EXPECT_EQ(m.description, "D");
    EXPECT_THROW(parse_merge_output("[]"), MalformedOutputError);
    EXPECT_THROW(parse_merge_output(R"({"summary":"S"})"), MalformedOutputError);
}

TEST(PromptLibrary, RendersPlaceholdersAndKeepsJsonBraces) {
    test::TempDir dir;
    for (const char* name : {"system", "merge_issues", "suggest_issues", "reformat"}) {
        test::write_file(dir / (std::string(name) + ".txt"), "T");
    }
    test::write_file(dir / "suggest_issues.txt", "Reply as [{\"summary\": ...}] for {project_description} x{max_suggestions}");
    PromptLibrary lib(dir.path());
    EXPECT_EQ(lib.render("suggest_issues", {{"project_description", "Shop"}, {"max_suggestions", "3"}}),
              "Reply as [{\"summary\": ...}] for Shop x3");
    EXPECT_EQ(code_of([&] { lib.render("suggest_issues", {}); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { lib.render("nope", {}); }), ErrorCode::ConfigError);
}

TEST(PromptLibrary, MissingTemplateIsConfigError) {
    test::TempDir dir;
    EXPECT_EQ(code_of([&] { PromptLibrary lib(dir.path()); }), ErrorCode::ConfigError);
}

TEST(PromptLibrary, BundledTemplatesRender) {
    SuggestionRequest r;
    EXPECT_NO_THROW(prompts().render("system", {}));
    EXPECT_NO_THROW(prompts().render("merge_issues", {{"issues", "x"}}));
    EXPECT_NO_THROW(prompts().render("suggest_issues", {{"project_description", "d"},
                                                         {"issue_digest", "- P-1: x"},
                                                         {"user_prompt", ""},
                                                         {"max_suggestions", "5"}}));
    EXPECT_NO_THROW(prompts().render("reformat", {{"error", "e"}, {"previous_output", "p"}, {"original_request", "o"}}));
}

TEST(MergeDrafting, MockUsesLowestKeySummary) {
    MockChatProvider mock;
    std::vector<Issue> issues{make_issue("P-2", "Second", "two"), make_issue("P-1", "First", "one")};
    auto text = draft_merge_text(issues, mock, prompts());
    EXPECT_EQ(text.summary, "First");
    EXPECT_EQ(text.description, "one\n---\ntwo");
    auto again = draft_merge_text(issues, mock, prompts());
    EXPECT_EQ(again.summary, text.summary);
    EXPECT_EQ(again.description, text.description);
}

TEST(MergeDrafting, NeedsTwoIssues) {
    MockChatProvider mock;
    EXPECT_EQ(code_of([&] { draft_merge_text({make_issue("P-1", "x")}, mock, prompts()); }),
              ErrorCode::InvalidArgument);
}

TEST(MergeDrafting, OneReformatRetry) {
    MockChatProvider mock({"not json at all", R"({"summary":"Fixed","description":"Body"})"});
    std::vector<Issue> issues{make_issue("P-1", "a"), make_issue("P-2", "b")};
    auto text = draft_merge_text(issues, mock, prompts());
    EXPECT_EQ(text.summary, "Fixed");
    EXPECT_EQ(mock.calls(), 2u);

    MockChatProvider bad({"nope", "still nope"});
    EXPECT_EQ(code_of([&] { draft_merge_text(issues, bad, prompts()); }), ErrorCode::MalformedModelOutput);
    EXPECT_EQ(bad.calls(), 2u);
}

TEST(MergeDrafting, RemoteRoundTrip) {
    ChatProviderConfig config;
    config.provider = ChatProviderKind::RemoteApi;
    config.model_name = "chat-model";
    config.api_url = "http://chat.local/v1/chat/completions";
    config.api_key = "k";
    std::vector<HttpRequest> seen;
    auto transport = std::make_shared<RecordingTransport>([](const HttpRequest&) {
        json content = {{"summary", "Merged title"}, {"description", "Merged body"}};
        json reply = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content.dump()}}}}})}};
        return HttpResponse{200, reply.dump(), {}};
    });
    RemoteChatProvider remote(config, transport);
    std::vector<Issue> issues{make_issue("P-1", "a", "x"), make_issue("P-2", "b", "y")};
    auto text = draft_merge_text(issues, remote, prompts());
    EXPECT_EQ(text.summary, "Merged title");
    EXPECT_EQ(text.description, "Merged body");
    auto body = json::parse(transport->requests().at(0).body);
    EXPECT_EQ(body["model"], "chat-model");
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_NE(body["messages"][1]["content"].get<std::string>().find("[P-1] a"), std::string::npos);
    EXPECT_EQ(transport->requests().at(0).headers.at("Authorization"), "Bearer k");
}

TEST(MergeDrafting, RemoteFailureIsProviderError) {
    ChatProviderConfig config;
    config.provider = ChatProviderKind::RemoteApi;
    config.api_url = "http://chat.local";
    auto transport = std::make_shared<RecordingTransport>([](const HttpRequest&) { return HttpResponse{401, "no", {}}; });
    RemoteChatProvider remote(config, transport);
    std::vector<Issue> issues{make_issue("P-1", "a"), make_issue("P-2", "b")};
    EXPECT_EQ(code_of([&] { draft_merge_text(issues, remote, prompts()); }), ErrorCode::ProviderError);
}

TEST(Suggest, MockIsDeterministic) {
    auto s = test::make_snapshot({make_issue("P-1", "Password reset email never arrives", "Users get nothing"),
                                  make_issue("P-2", "Add dark mode toggle", "Settings page theme switch")});
    MockChatProvider mock;
    auto e = local_embedder();
    auto first = suggest_new_issues(request_for(s), s, mock, prompts(), e, EngineConfig{});
    auto second = suggest_new_issues(request_for(s), s, mock, prompts(), e, EngineConfig{});
    ASSERT_EQ(first.size(), MockChatProvider::catalogue().size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        EXPECT_EQ(first[i].summary, second[i].summary);
        EXPECT_EQ(first[i].summary, MockChatProvider::catalogue()[i].summary);
        ASSERT_TRUE(first[i].redundancy_score.has_value());
        EXPECT_LT(*first[i].redundancy_score, 0.80);
    }
}

TEST(Suggest, UserPromptLeadsAndMaxTruncates) {
    auto s = test::make_snapshot({make_issue("P-1", "Password reset email never arrives"),
                                  make_issue("P-2", "Add dark mode toggle")});
    MockChatProvider mock;
    auto e = local_embedder();
    auto out = suggest_new_issues(request_for(s, "gift cards", 2), s, mock, prompts(), e, EngineConfig{});
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].summary, "Follow up: gift cards");
    EXPECT_EQ(code_of([&] { suggest_new_issues(request_for(s, "", 0), s, mock, prompts(), e, EngineConfig{}); }),
              ErrorCode::InvalidArgument);
}

TEST(Suggest, CopyOfExistingIssueIsFiltered) {
    const auto& item = MockChatProvider::catalogue()[1];
    auto s = test::make_snapshot({make_issue("P-1", item.summary, item.description),
                                  make_issue("P-2", "Unrelated checkout bug", "Coupon field crashes")});
    MockChatProvider mock;
    auto e = local_embedder();
    auto out = suggest_new_issues(request_for(s), s, mock, prompts(), e, EngineConfig{});
    EXPECT_EQ(out.size(), MockChatProvider::catalogue().size() - 1);
    for (const auto& sug : out) {
        EXPECT_NE(sug.summary, item.summary);
    }
}

TEST(Suggest, GibberishIsRetained) {
    auto golden = json::parse(test::read_file(test::data_dir() / "local_hash_golden.json"));
    const auto text = golden["gibberish_suggestion"]["text"].get<std::string>();
    ASSERT_LT(std::stod(golden["gibberish_suggestion"]["max_against_backlog51"].get<std::string>()), 0.80);
    auto s = FixtureGateway(test::fixture_dir() / "backlog51.json").fetch_backlog();
    json reply = json::array({{{"summary", text}, {"description", ""}, {"rationale", "r"}}});
    MockChatProvider mock({reply.dump()});
    auto e = local_embedder();
    auto out = suggest_new_issues(request_for(s), s, mock, prompts(), e, EngineConfig{});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_NEAR(*out[0].redundancy_score, std::stod(golden["gibberish_suggestion"]["max_against_backlog51"].get<std::string>()),
                1e-9);
}

TEST(Suggest, ProseReplyIsMalformedWithNoPartialResults) {
    auto s = test::make_snapshot({make_issue("P-1", "Password reset"), make_issue("P-2", "Dark mode")});
    MockChatProvider mock({"Here are my ideas: more tests.", "Still prose."});
    auto e = local_embedder();
    EXPECT_EQ(code_of([&] { suggest_new_issues(request_for(s), s, mock, prompts(), e, EngineConfig{}); }),
              ErrorCode::MalformedModelOutput);
}

TEST(Suggest, ReformatRetryEchoesParseError) {
    struct Capturing final : ChatProvider {
        std::vector<ChatPrompt> prompts;
        std::string complete(const ChatPrompt& p) override {
            prompts.push_back(p);
            return prompts.size() == 1 ? "oops" : "[]";
        }
    } provider;
    auto s = test::make_snapshot({make_issue("P-1", "Password reset"), make_issue("P-2", "Dark mode")});
    auto e = local_embedder();
    EXPECT_TRUE(suggest_new_issues(request_for(s), s, provider, prompts(), e, EngineConfig{}).empty());
    ASSERT_EQ(provider.prompts.size(), 2u);
    EXPECT_TRUE(provider.prompts[1].reformat_retry);
    EXPECT_NE(provider.prompts[1].user.find("oops"), std::string::npos);
    EXPECT_NE(provider.prompts[1].user.find("not valid JSON"), std::string::npos);
}

TEST(ChatConfig, Validation) {
    ChatProviderConfig c;
    EXPECT_NO_THROW(validate(c));
    c.provider = ChatProviderKind::RemoteApi;
    EXPECT_THROW(validate(c), Error);
    c.api_url = "http://x";
    EXPECT_NO_THROW(validate(c));
    c.max_output_tokens = 0;
    EXPECT_THROW(validate(c), Error);
}
