// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fail.

#include "groom/cli.hpp"
#include "groom/dedup.hpp"
#include "groom/embedding.hpp"
#include "groom/error.hpp"
#include "groom/evaluation.hpp"
#include "groom/gateway.hpp"
#include "groom/genai.hpp"
#include "groom/review.hpp"
#include "groom/vector_index.hpp"
#include "test_support.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace groom;
using json = nlohmann::json;

namespace {

struct Outcome {
    bool ok = true;
    std::vector<std::string> notes;

    void check(bool condition, const std::string& what) {
        if (!condition) {
            ok = false;
            notes.push_back(what);
        }
    }
};

int failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<void(Outcome&)>& body) {
    Outcome o;
    auto start = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.check(false, std::string("exception: ") + e.what());
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed >= limit_seconds) {
        o.check(false, "took " + std::to_string(elapsed) + " s, limit " + std::to_string(limit_seconds) + " s");
    }
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.3f", elapsed);
    std::cout << (o.ok ? "PASS" : "FAIL") << "  " << name << " (" << timing << " s)\n";
    for (const auto& n : o.notes) {
        std::cout << "      " << n << "\n";
    }
    if (!o.ok) {
        ++failures;
    }
}

Embedder local_embedder() {
    return Embedder(std::make_shared<LocalHashProvider>(), EmbeddingProviderConfig{});
}

// --- published metric rows -------------------------------------------------

void published_rows(Outcome& o) {
    struct Row {
        const char* label;
        ConfusionMatrix cm;
        const char* values[4];
    };
    const Row rows[] = {
        {"#8 Manual", {8, 1, 33, 1233}, {"0.8889", "0.1951", "0.9733", "0.3200"}},
        {"#8 Auto", {15, 0, 26, 1234}, {"1.0000", "0.3659", "0.9796", "0.5986"}},
        {"#11 Manual", {12, 1, 29, 1233}, {"0.9231", "0.2927", "0.9765", "0.4444"}},
        {"#11 Auto", {20, 0, 21, 1234}, {"1.0000", "0.4878", "0.9835", "0.6557"}},
        {"#9 Auto", {21, 0, 20, 1234}, {"1.0000", "0.5122", "0.9843", "0.6774"}},
        {"#10 Manual", {7, 2, 34, 1232}, {"0.7778", "0.1707", "0.9718", "0.2800"}},
        {"#12 Auto", {12, 0, 29, 1234}, {"1.0000", "0.2927", "0.9773", "0.4528"}},
    };
    const char* names[4] = {"Precision", "Recall", "Accuracy", "F1"};
    for (const auto& row : rows) {
        auto m = metrics(row.cm);
        const double got[4] = {m.precision, m.recall, m.accuracy, m.f1};
        for (int i = 0; i < 4; ++i) {
            auto text = format_metric(got[i]);
            o.check(text == row.values[i], std::string(row.label) + " " + names[i] + ": computed " + text +
                                               ", published " + row.values[i]);
        }
    }
}

// --- confusion matrix consistency -----------------------------------------

void confusion_consistency(Outcome& o) {
    auto truth = load_ground_truth(test::fixture_dir() / "backlog51_truth.csv");
    auto snapshot = FixtureGateway(test::fixture_dir() / "backlog51.json").fetch_backlog();
    o.check(truth.true_pairs.size() == 41, "fixture truth should hold 41 pairs");
    auto universe = all_pairs(snapshot);
    o.check(universe.size() == 1275, "51 issues should give 1275 pairs");
    std::mt19937 rng(2024);
    for (int round = 0; round < 200; ++round) {
        std::set<IssuePair> predicted;
        std::bernoulli_distribution keep(round / 200.0);
        for (const auto& p : universe) {
            if (keep(rng)) {
                predicted.insert(p);
            }
        }
        auto cm = score(predicted, truth);
        if (cm.total() != 1275 || cm.tp + cm.fn != 41) {
            o.check(false, "totals broken for a predicted set of size " + std::to_string(predicted.size()));
            break;
        }
    }
    ConfusionMatrix tool{35, 8, 6, 0};
    tool.tn = 1275 - tool.tp - tool.fp - tool.fn;
    o.check(tool.tn == 1226, "35/8/6 should imply tn = 1226");
    const std::string expected =
        "                              Predicted\n"
        "                      Duplicate  Non-duplicate\n"
        "Actual Duplicate             35              6\n"
        "       Non-duplicate          8           1226\n";
    o.check(render_confusion_matrix(tool) == expected, "rendered matrix differs:\n" + render_confusion_matrix(tool));
}

// --- efficiency arithmetic ----------------------------------------------------

void efficiency(Outcome& o) {
    double pct = efficiency_comparison(174, 95);
    o.check(std::abs(pct - 45.40) <= 0.5, "efficiency_comparison(174, 95) = " + std::to_string(pct));
    o.check(std::abs(pct - 45.38) <= 0.5, "not within 0.5 of 45.38");
}

// --- oracle equivalence -------------------------------------------------------

std::string random_text(std::mt19937& rng) {
    static const std::vector<std::string> words{
        "login", "password", "reset", "email", "checkout", "cart", "payment", "refund", "invoice", "export",
        "search", "filter", "mobile", "android", "ios", "crash", "slow", "page", "button", "dark",
        "mode", "theme", "profile", "avatar", "upload", "image", "order", "history", "coupon", "shipping",
        "address", "validation", "error", "timeout", "api", "cache", "report", "admin", "user", "settings"};
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    std::uniform_int_distribution<int> len(2, 12);
    std::string s;
    for (int i = len(rng); i > 0; --i) {
        s += (s.empty() ? "" : " ") + words[pick(rng)];
    }
    return s;
}

std::string mutate(std::string s, std::mt19937& rng) {
    std::uniform_int_distribution<int> edits(0, 3);
    for (int e = edits(rng); e > 0; --e) {
        std::uniform_int_distribution<std::size_t> pos(0, s.size() - 1);
        s[pos(rng)] = static_cast<char>('a' + rng() % 26);
    }
    return s;
}

// Identical vectors score exactly 1.
double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a == b) {
        return 1.0;
    }
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<long double>(a[i]) * b[i];
        na += static_cast<long double>(a[i]) * a[i];
        nb += static_cast<long double>(b[i]) * b[i];
    }
    return std::min(1.0, static_cast<double>(dot / std::sqrt(na * nb)));
}

void oracle_equivalence(Outcome& o) {
    std::mt19937 rng(777);
    auto embedder = local_embedder();
    int mismatched = 0;
    for (int round = 0; round < 50; ++round) {
        std::uniform_int_distribution<int> size(2, 200);
        const int n = size(rng);
        std::vector<std::string> texts;
        for (int i = 0; i < n; ++i) {
            if (i > 0 && rng() % 3 == 0) {
                texts.push_back(mutate(texts[rng() % texts.size()], rng));
            } else {
                texts.push_back(random_text(rng));
            }
        }
        std::uniform_real_distribution<double> thr(0.3, 1.0);
        const double threshold = round % 10 == 0 ? 1.0 : thr(rng);

        VectorIndex index;
        std::vector<std::pair<std::string, std::vector<double>>> items;
        for (int i = 0; i < n; ++i) {
            char key[16];
            std::snprintf(key, sizeof key, "K-%03d", i);
            auto v = embedder.embed_text(texts[i]);
            items.emplace_back(key, v.values);
            index.upsert({key, v});
        }
        std::map<IssuePair, double> expected;
        for (std::size_t i = 0; i < items.size(); ++i) {
            for (std::size_t j = i + 1; j < items.size(); ++j) {
                double s = oracle_cosine(items[i].second, items[j].second);
                if (s >= threshold) {
                    expected[canonicalize_pair(items[i].first, items[j].first)] = s;
                }
            }
        }
        auto hits = index.pairwise_scan(threshold);
        std::map<IssuePair, double> got;
        for (const auto& h : hits) {
            got[h.pair] = h.score;
        }
        bool same = got.size() == expected.size();
        for (auto g = got.begin(), e = expected.begin(); same && g != got.end(); ++g, ++e) {
            same = g->first == e->first && std::abs(g->second - e->second) <= 1e-9;
        }
        if (!same) {
            ++mismatched;
            o.check(false, "round " + std::to_string(round) + ": n=" + std::to_string(n) + " threshold=" +
                               std::to_string(threshold) + " scan=" + std::to_string(got.size()) +
                               " oracle=" + std::to_string(expected.size()));
        }
    }
    (void)mismatched;
}

// --- property suite -------------------------------------------------------------

/// Serves a fixed snapshot and records mutations instead of performing them.
class RecordingGateway final : public Gateway {
public:
    explicit RecordingGateway(BacklogSnapshot s) : snapshot_(std::move(s)) {}
    std::vector<GroomingAction> mutations;

protected:
    BacklogSnapshot do_fetch() override { return snapshot_; }
    ApplyReceipt do_apply(const GroomingAction& action) override {
        mutations.push_back(action);
        ApplyReceipt r;
        r.kind = action.kind();
        r.steps.push_back({"", "recorded", StepStatus::Applied, ""});
        return r;
    }

private:
    BacklogSnapshot snapshot_;
};

void property_suite(Outcome& o) {
    std::mt19937 rng(31337);
    std::normal_distribution<double> normal;

    // cosine
    for (int i = 0; i < 2000; ++i) {
        EmbeddingVector a, b;
        for (int d = 0; d < 16; ++d) {
            a.values.push_back(normal(rng));
            b.values.push_back(normal(rng));
        }
        double ab = cosine(a, b);
        auto scaled = a;
        double k = std::exp(normal(rng) * 3);
        for (auto& x : scaled.values) {
            x *= k;
        }
        if (ab != cosine(b, a) || ab < -1.0 || ab > 1.0 || std::abs(cosine(scaled, b) - ab) > 1e-12) {
            o.check(false, "cosine symmetry/scale/bounds violated");
            break;
        }
    }

    // threshold monotonicity of detection
    auto snapshot = FixtureGateway(test::fixture_dir() / "backlog51.json").fetch_backlog();
    auto embedder = local_embedder();
    std::set<IssuePair> previous;
    bool first = true;
    for (double t = 0.30; t <= 1.0001; t += 0.05) {
        EngineConfig config;
        config.duplicate_threshold = std::min(t, 1.0);
        std::set<IssuePair> now;
        for (const auto& c : detect_duplicates(snapshot, embedder, config)) {
            now.insert(c.pair);
        }
        if (!first && !std::includes(previous.begin(), previous.end(), now.begin(), now.end())) {
            o.check(false, "raising the threshold to " + std::to_string(t) + " added pairs");
        }
        previous = std::move(now);
        first = false;
    }

    // cluster partitioning against a reference flood fill
    std::vector<std::string> keys;
    for (const auto& issue : snapshot.issues) {
        keys.push_back(issue.key);
    }
    for (int round = 0; round < 200; ++round) {
        std::vector<DuplicateCandidate> accepted;
        std::map<std::string, std::set<std::string>> adjacency;
        std::uniform_int_distribution<std::size_t> pick(0, keys.size() - 1);
        std::uniform_int_distribution<int> edges(0, 60);
        for (int e = edges(rng); e > 0; --e) {
            auto a = keys[pick(rng)], b = keys[pick(rng)];
            if (a == b) {
                continue;
            }
            auto pair = canonicalize_pair(a, b);
            accepted.push_back({candidate_id(pair), pair, 0.9, ReviewStatus::Accepted, std::nullopt});
            adjacency[a].insert(b);
            adjacency[b].insert(a);
        }
        std::set<std::set<std::string>> reference;
        std::set<std::string> seen;
        for (const auto& [start, _] : adjacency) {
            if (seen.count(start)) {
                continue;
            }
            std::set<std::string> component;
            std::vector<std::string> stack{start};
            while (!stack.empty()) {
                auto k = stack.back();
                stack.pop_back();
                if (!component.insert(k).second) {
                    continue;
                }
                for (const auto& next : adjacency[k]) {
                    stack.push_back(next);
                }
            }
            seen.insert(component.begin(), component.end());
            reference.insert(component);
        }
        std::set<std::set<std::string>> got;
        std::size_t member_total = 0;
        for (const auto& cl : cluster(accepted, snapshot, EngineConfig{})) {
            got.insert(std::set<std::string>(cl.members.begin(), cl.members.end()));
            member_total += cl.members.size();
        }
        if (got != reference || member_total != seen.size()) {
            o.check(false, "cluster() disagrees with the reference partition in round " + std::to_string(round));
            break;
        }
    }

    // canonical pair idempotence
    for (int i = 0; i < 1000; ++i) {
        auto a = "K-" + std::to_string(rng() % 300), b = "K-" + std::to_string(rng() % 300);
        if (a == b) {
            continue;
        }
        auto p = canonicalize_pair(a, b);
        if (!(canonicalize_pair(p.a, p.b) == p) || !(canonicalize_pair(b, a) == p) || !(p.a < p.b)) {
            o.check(false, "canonicalize_pair not idempotent for " + a + "," + b);
            break;
        }
    }

    // LocalHash unit norm and determinism
    for (int i = 0; i < 300; ++i) {
        auto text = random_text(rng);
        auto v1 = local_hash_embed(text);
        auto v2 = local_hash_embed(text);
        double norm = 0;
        for (double x : v1.values) {
            norm += x * x;
        }
        if (v1.values != v2.values || std::abs(std::sqrt(norm) - 1.0) > 1e-12) {
            o.check(false, "LocalHash not unit-norm or not deterministic for '" + text + "'");
            break;
        }
    }

    // parser totality
    const std::string seed = R"([{"summary":"Add dark mode","description":"Theme","rationale":"Asked for"}])";
    const std::string alphabet = "[]{}\",:\\ abS0\n";
    for (int i = 0; i < 5000; ++i) {
        std::string s = seed;
        for (int e = 1 + static_cast<int>(rng() % 6); e > 0; --e) {
            std::size_t p = rng() % (s.size() + 1);
            char c = alphabet[rng() % alphabet.size()];
            switch (rng() % 3) {
            case 0: s.insert(s.begin() + p, c); break;
            case 1: if (p < s.size()) s.erase(s.begin() + p); break;
            default: if (p < s.size()) s[p] = c; break;
            }
        }
        try {
            parse_model_output(s);
        } catch (const MalformedOutputError&) {
        } catch (...) {
            o.check(false, "parser threw a non-contract exception for: " + s);
            break;
        }
    }

    // confirmation gate
    ReviewServiceDeps deps;
    deps.embedder = std::make_shared<Embedder>(std::make_shared<LocalHashProvider>(), EmbeddingProviderConfig{});
    deps.chat = std::make_shared<MockChatProvider>();
    deps.prompts = std::make_shared<PromptLibrary>(PromptLibrary::default_directory());
    ReviewService service(deps);
    auto gateway = std::make_shared<RecordingGateway>(snapshot);
    auto id = service.start_session(gateway, EngineConfig{}, SessionMode::Interactive, "Online shop");
    service.request_suggestions(id, "gift cards");
    try {
        service.apply(id);
        o.check(false, "apply with nothing decided should fail");
    } catch (const Error& e) {
        o.check(e.code() == ErrorCode::NothingToApply, std::string("unexpected error: ") + e.what());
    }
    o.check(gateway->mutations.empty(), "undecided items reached the gateway");

    auto session = service.get(id);
    const auto& chosen = session.candidates.front();
    service.record_decision(id, {chosen.id, Verdict::Accept});
    service.apply(id);
    for (const auto& m : gateway->mutations) {
        const auto* merge = std::get_if<MergeClusterPayload>(&m.payload);
        if (!merge) {
            o.check(false, "an unconfirmed suggestion was created");
            continue;
        }
        std::set<std::string> members(merge->absorbed.begin(), merge->absorbed.end());
        members.insert(merge->survivor);
        o.check(members == std::set<std::string>{chosen.pair.a, chosen.pair.b},
                "merge touched issues beyond the confirmed pair");
    }
    o.check(gateway->mutations.size() == 1, "expected exactly one mutation");
}

// --- end-to-end auto run ------------------------------------------------------

void end_to_end(Outcome& o) {
    test::TempDir dir;
    auto copy = dir / "backlog.json";
    std::filesystem::copy_file(test::fixture_dir() / "backlog51.json", copy);
    const std::string truth = (test::fixture_dir() / "backlog51_truth.csv").string();
    const std::vector<std::string> args{"groom", "groom", "--auto", "--fixture", copy.string(), "--truth", truth};
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    o.check(code == 0, "exit code " + std::to_string(code) + ": " + err.str());
    if (code != 0) {
        return;
    }
    auto result = json::parse(out.str());
    o.check(result["metrics"]["Precision"] == 1.0, "precision " + result["metrics"]["Precision"].dump());
    o.check(result["metrics"]["FP"] == 0, "false positives present");
    o.check(!result["receipts"].empty(), "no receipts");

    auto after = FixtureGateway(copy).fetch_backlog();
    o.check(after.issues.size() == 51, "issue count changed");
    std::size_t closed = 0;
    for (const auto& issue : after.issues) {
        closed += issue.status == IssueStatus::Closed;
    }
    std::size_t absorbed = 0;
    for (const auto& r : result["receipts"]) {
        for (const auto& step : r["steps"]) {
            absorbed += step["step"] == "transition" && step["status"] == "Applied";
        }
    }
    o.check(closed >= absorbed && absorbed > 0, "absorbed issues were not closed in the fixture copy");
    auto doc = json::parse(test::read_file(copy));
    o.check(doc.is_object() && doc["issues"].size() == 51, "fixture copy is not a complete document");
}

}  // namespace

int main() {
    criterion("published metric rows reproduce to 4 decimals", 1.0, published_rows);
    criterion("confusion matrix totals and 35/8/6 rendering", 1.0, confusion_consistency);
    criterion("efficiency comparison 174 s vs 95 s", 1.0, efficiency);
    criterion("pairwise scan equals brute-force oracle on 50 random backlogs", 30.0, oracle_equivalence);
    criterion("property suite", 60.0, property_suite);
    criterion("end-to-end groom --auto on a fixture copy", 10.0, end_to_end);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
    return failures == 0 ? 0 : 1;
}
