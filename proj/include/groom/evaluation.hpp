#pragma once

#include "groom/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace groom {

/// Labeled duplicate pairs over a universe of n issues. When issue keys are
/// known (from a companion fixture) they bound which pairs may be scored.
struct GroundTruth {
    std::size_t n_issues = 0;
    std::set<IssuePair> true_pairs;
    std::set<std::string> issue_keys;  // empty when only the count is known
};

/// Reads an "issue_a,issue_b" CSV. The issue count comes from `companion`
/// (a snapshot of the labeled backlog) when given, else from a "#n=<count>"
/// comment line. Throws ParseError (with line) or SelfPair.
GroundTruth load_ground_truth(const std::filesystem::path& path,
                              const std::optional<BacklogSnapshot>& companion = std::nullopt);

/// Checks the GroundTruth invariants; throws Error(InvalidArgument).
void validate(const GroundTruth& truth);

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

/// Pair-space scoring: every one of the n(n-1)/2 pairs is a classification.
ConfusionMatrix score(const std::set<IssuePair>& predicted, const GroundTruth& truth);

struct MetricsReport {
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    double time_seconds = 0.0;
    std::optional<double> seconds_per_tp;
};

/// Precision is 1.0 when nothing was predicted; F1 is 0 when P + R = 0.
MetricsReport metrics(const ConfusionMatrix& cm, double time_seconds = 0.0);

/// Percentage drop from the manual to the assisted time per true positive.
/// Throws Error(NonPositiveBaseline) when manual <= 0.
double efficiency_comparison(double manual_seconds_per_tp, double assisted_seconds_per_tp);

/// One row of the comparison table.
struct ResultRow {
    std::string participant;
    ConfusionMatrix cm;
    MetricsReport report;
};

/// Fixed-point with 4 decimals, the only place values get rounded.
std::string format_metric(double value);

/// Participant,TP,FP,FN,TN,Time,Precision,Recall,Accuracy,F1
std::string csv_header();
std::string to_csv_line(const ResultRow& row);
/// Keys in CSV column order; metric values rounded to 4 decimals.
nlohmann::ordered_json to_json(const ResultRow& row);

/// 2x2 text table, actual classes as rows and predicted classes as columns.
std::string render_confusion_matrix(const ConfusionMatrix& cm);

/// Reads predicted pairs from a CSV ("issue_a,issue_b" header, optional extra
/// columns) or a JSON array of {"a","b"} / {"pair":{"a","b"}} objects.
std::set<IssuePair> load_predictions(const std::filesystem::path& path);

}  // namespace groom
