#include "groom/evaluation.hpp"

#include "groom/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace groom {

namespace {

std::string trim(std::string s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream in(line);
    std::string field;
    while (std::getline(in, field, ',')) {
        fields.push_back(trim(field));
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

std::uint64_t pair_count(std::uint64_t n) {
    return n < 2 ? 0 : n * (n - 1) / 2;
}

std::set<std::string> keys_of(const std::set<IssuePair>& pairs) {
    std::set<std::string> keys;
    for (const auto& p : pairs) {
        keys.insert(p.a);
        keys.insert(p.b);
    }
    return keys;
}

}  // namespace

GroundTruth load_ground_truth(const std::filesystem::path& path, const std::optional<BacklogSnapshot>& companion) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::ParseError, "cannot read ground truth " + path.string());
    }
    GroundTruth truth;
    std::optional<std::size_t> declared_n;
    bool header_seen = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            if (line.rfind("#n=", 0) == 0) {
                try {
                    std::size_t used = 0;
                    declared_n = std::stoul(line.substr(3), &used);
                    if (used != line.size() - 3) {
                        throw std::invalid_argument("trailing");
                    }
                } catch (const std::exception&) {
                    throw ParseError(ErrorCode::ParseError, "bad issue count comment '" + line + "'", line_no);
                }
            }
            continue;
        }
        auto fields = split_csv(line);
        if (!header_seen) {
            if (fields.size() < 2 || fields[0] != "issue_a" || fields[1] != "issue_b") {
                throw ParseError(ErrorCode::ParseError, "expected header 'issue_a,issue_b'", line_no);
            }
            header_seen = true;
            continue;
        }
        if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
            throw ParseError(ErrorCode::ParseError, "expected two issue keys", line_no);
        }
        if (fields[0] == fields[1]) {
            throw ParseError(ErrorCode::SelfPair, "pair of " + fields[0] + " with itself", line_no);
        }
        truth.true_pairs.insert(canonicalize_pair(fields[0], fields[1]));
    }
    if (!header_seen) {
        throw ParseError(ErrorCode::ParseError, "missing header 'issue_a,issue_b'", line_no);
    }
    if (companion) {
        truth.n_issues = companion->issues.size();
        for (const auto& issue : companion->issues) {
            truth.issue_keys.insert(issue.key);
        }
    } else if (declared_n) {
        truth.n_issues = *declared_n;
    } else {
        throw Error(ErrorCode::ParseError,
                    "ground truth " + path.string() + " gives no issue count (#n=) and no companion backlog");
    }
    validate(truth);
    return truth;
}

void validate(const GroundTruth& truth) {
    if (truth.n_issues == 0) {
        throw Error(ErrorCode::InvalidArgument, "ground truth needs a positive issue count");
    }
    if (truth.true_pairs.size() > pair_count(truth.n_issues)) {
        throw Error(ErrorCode::InvalidArgument, "more true pairs than the pair space holds");
    }
    const auto keys = keys_of(truth.true_pairs);
    if (!truth.issue_keys.empty()) {
        if (truth.issue_keys.size() != truth.n_issues) {
            throw Error(ErrorCode::InvalidArgument, "issue key list does not match the issue count");
        }
        for (const auto& k : keys) {
            if (!truth.issue_keys.count(k)) {
                throw Error(ErrorCode::UnknownIssueKey, "true pair mentions unknown issue " + k);
            }
        }
    } else if (keys.size() > truth.n_issues) {
        throw Error(ErrorCode::InvalidArgument, "true pairs mention more issues than the declared count");
    }
}

ConfusionMatrix score(const std::set<IssuePair>& predicted, const GroundTruth& truth) {
    const auto predicted_keys = keys_of(predicted);
    if (!truth.issue_keys.empty()) {
        for (const auto& k : predicted_keys) {
            if (!truth.issue_keys.count(k)) {
                throw Error(ErrorCode::UnknownIssueKey, "prediction mentions unknown issue " + k);
            }
        }
    } else {
        auto universe = keys_of(truth.true_pairs);
        universe.insert(predicted_keys.begin(), predicted_keys.end());
        if (universe.size() > truth.n_issues) {
            throw Error(ErrorCode::UnknownIssueKey, "predictions mention more issues than the labeled backlog holds");
        }
    }
    ConfusionMatrix cm;
    for (const auto& p : predicted) {
        if (p.a >= p.b) {
            throw Error(ErrorCode::InvalidArgument, "prediction " + p.a + "," + p.b + " is not canonical");
        }
        if (truth.true_pairs.count(p)) {
            ++cm.tp;
        } else {
            ++cm.fp;
        }
    }
    cm.fn = truth.true_pairs.size() - cm.tp;
    cm.tn = pair_count(truth.n_issues) - cm.tp - cm.fp - cm.fn;
    return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm, double time_seconds) {
    MetricsReport r;
    const auto tp = static_cast<double>(cm.tp);
    r.precision = cm.tp + cm.fp == 0 ? 1.0 : tp / static_cast<double>(cm.tp + cm.fp);
    r.recall = cm.tp + cm.fn == 0 ? 0.0 : tp / static_cast<double>(cm.tp + cm.fn);
    r.accuracy = cm.total() == 0 ? 0.0 : static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    r.time_seconds = time_seconds;
    if (cm.tp > 0) {
        r.seconds_per_tp = time_seconds / tp;
    }
    return r;
}

double efficiency_comparison(double manual_seconds_per_tp, double assisted_seconds_per_tp) {
    if (!(manual_seconds_per_tp > 0.0)) {
        throw Error(ErrorCode::NonPositiveBaseline, "manual time per duplicate must be positive");
    }
    return 100.0 * (manual_seconds_per_tp - assisted_seconds_per_tp) / manual_seconds_per_tp;
}

std::string format_metric(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", value);
    return buf;
}

std::string csv_header() {
    return "Participant,TP,FP,FN,TN,Time,Precision,Recall,Accuracy,F1";
}

std::string to_csv_line(const ResultRow& row) {
    char time[32];
    std::snprintf(time, sizeof time, "%.2f", row.report.time_seconds);
    std::ostringstream out;
    out << row.participant << ',' << row.cm.tp << ',' << row.cm.fp << ',' << row.cm.fn << ',' << row.cm.tn << ','
        << time << ',' << format_metric(row.report.precision) << ',' << format_metric(row.report.recall) << ','
        << format_metric(row.report.accuracy) << ',' << format_metric(row.report.f1);
    return out.str();
}

nlohmann::ordered_json to_json(const ResultRow& row) {
    auto rounded = [](double v) { return std::round(v * 1e4) / 1e4; };
    nlohmann::ordered_json j;
    j["Participant"] = row.participant;
    j["TP"] = row.cm.tp;
    j["FP"] = row.cm.fp;
    j["FN"] = row.cm.fn;
    j["TN"] = row.cm.tn;
    j["Time"] = row.report.time_seconds;
    j["Precision"] = rounded(row.report.precision);
    j["Recall"] = rounded(row.report.recall);
    j["Accuracy"] = rounded(row.report.accuracy);
    j["F1"] = rounded(row.report.f1);
    j["seconds_per_tp"] = row.report.seconds_per_tp ? nlohmann::ordered_json(*row.report.seconds_per_tp)
                                                    : nlohmann::ordered_json(nullptr);
    return j;
}

std::string render_confusion_matrix(const ConfusionMatrix& cm) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "                              Predicted\n"
                  "                      Duplicate  Non-duplicate\n"
                  "Actual Duplicate      %9llu  %13llu\n"
                  "       Non-duplicate  %9llu  %13llu\n",
                  static_cast<unsigned long long>(cm.tp), static_cast<unsigned long long>(cm.fn),
                  static_cast<unsigned long long>(cm.fp), static_cast<unsigned long long>(cm.tn));
    return buf;
}

std::set<IssuePair> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::ParseError, "cannot read predictions " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    const auto first = text.find_first_not_of(" \t\r\n");

    std::set<IssuePair> pairs;
    if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, "predictions " + path.string() + ": " + e.what());
        }
        // Accept a bare array or an object carrying "predicted_pairs".
        if (doc.is_object() && doc.contains("predicted_pairs")) {
            doc = doc["predicted_pairs"];
        }
        if (!doc.is_array()) {
            throw Error(ErrorCode::ParseError, "predictions " + path.string() + " must be a JSON array");
        }
        try {
            for (const auto& item : doc) {
                const auto& p = item.contains("pair") ? item.at("pair") : item;
                pairs.insert(canonicalize_pair(p.at("a").get<std::string>(), p.at("b").get<std::string>()));
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, "predictions " + path.string() + ": " + e.what());
        }
        return pairs;
    }

    std::istringstream lines(text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(lines, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        auto fields = split_csv(line);
        if (!header_seen) {
            if (fields.size() < 2 || fields[0] != "issue_a" || fields[1] != "issue_b") {
                throw ParseError(ErrorCode::ParseError, "expected header 'issue_a,issue_b'", line_no);
            }
            header_seen = true;
            continue;
        }
        if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
            throw ParseError(ErrorCode::ParseError, "expected two issue keys", line_no);
        }
        if (fields[0] == fields[1]) {
            throw ParseError(ErrorCode::SelfPair, "pair of " + fields[0] + " with itself", line_no);
        }
        pairs.insert(canonicalize_pair(fields[0], fields[1]));
    }
    return pairs;
}

}  // namespace groom
