#include "groom/model.hpp"

#include "groom/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <unordered_set>

namespace groom {

namespace {

int read_digits(std::string_view text, std::size_t& pos, std::size_t count) {
    if (pos + count > text.size()) {
        throw Error(ErrorCode::ParseError, "truncated timestamp: " + std::string(text));
    }
    int value = 0;
    for (std::size_t i = 0; i < count; ++i) {
        char c = text[pos + i];
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            throw Error(ErrorCode::ParseError, "bad timestamp: " + std::string(text));
        }
        value = value * 10 + (c - '0');
    }
    pos += count;
    return value;
}

void expect(std::string_view text, std::size_t& pos, std::string_view accepted) {
    if (pos >= text.size() || accepted.find(text[pos]) == std::string_view::npos) {
        throw Error(ErrorCode::ParseError, "bad timestamp: " + std::string(text));
    }
    ++pos;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    std::size_t pos = 0;
    int y = read_digits(text, pos, 4);
    expect(text, pos, "-");
    int mo = read_digits(text, pos, 2);
    expect(text, pos, "-");
    int d = read_digits(text, pos, 2);
    expect(text, pos, "Tt ");
    int h = read_digits(text, pos, 2);
    expect(text, pos, ":");
    int mi = read_digits(text, pos, 2);
    expect(text, pos, ":");
    int s = read_digits(text, pos, 2);

    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) {
        throw Error(ErrorCode::ParseError, "timestamp out of range: " + std::string(text));
    }

    milliseconds frac{0};
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        int scale = 100;
        std::size_t digits = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            if (scale > 0) {
                frac += milliseconds{(text[pos] - '0') * scale};
                scale /= 10;
            }
            ++pos;
            ++digits;
        }
        if (digits == 0) {
            throw Error(ErrorCode::ParseError, "bad fractional seconds: " + std::string(text));
        }
    }

    minutes offset{0};
    if (pos >= text.size()) {
        throw Error(ErrorCode::ParseError, "timestamp lacks a UTC offset: " + std::string(text));
    }
    if (text[pos] == 'Z' || text[pos] == 'z') {
        ++pos;
    } else {
        int sign = text[pos] == '-' ? -1 : 1;
        expect(text, pos, "+-");
        int oh = read_digits(text, pos, 2);
        if (pos < text.size() && text[pos] == ':') {
            ++pos;
        }
        int om = read_digits(text, pos, 2);
        offset = minutes{sign * (oh * 60 + om)};
    }
    if (pos != text.size()) {
        throw Error(ErrorCode::ParseError, "trailing characters in timestamp: " + std::string(text));
    }

    auto local = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + frac;
    return time_point_cast<milliseconds>(local - offset);
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    auto day_point = floor<days>(t);
    year_month_day ymd{day_point};
    hh_mm_ss<milliseconds> tod{t - day_point};
    char buf[40];
    if (tod.subseconds().count() != 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld.%03ldZ", int(ymd.year()),
                      unsigned(ymd.month()), unsigned(ymd.day()), long(tod.hours().count()),
                      long(tod.minutes().count()), long(tod.seconds().count()),
                      long(tod.subseconds().count()));
    } else {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", int(ymd.year()),
                      unsigned(ymd.month()), unsigned(ymd.day()), long(tod.hours().count()),
                      long(tod.minutes().count()), long(tod.seconds().count()));
    }
    return buf;
}

std::string_view to_string(IssueStatus status) {
    switch (status) {
    case IssueStatus::Open: return "Open";
    case IssueStatus::InProgress: return "InProgress";
    case IssueStatus::Done: return "Done";
    case IssueStatus::Closed: return "Closed";
    }
    return "Open";
}

IssueStatus parse_issue_status(std::string_view name) {
    for (auto s : {IssueStatus::Open, IssueStatus::InProgress, IssueStatus::Done, IssueStatus::Closed}) {
        if (name == to_string(s)) {
            return s;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown issue status: " + std::string(name));
}

void validate(const Issue& issue) {
    if (issue.key.empty()) {
        throw Error(ErrorCode::InvalidIssue, "issue key is empty");
    }
    if (issue.summary.empty()) {
        throw Error(ErrorCode::InvalidIssue, "issue " + issue.key + " has an empty summary");
    }
    if (issue.created_at > issue.updated_at) {
        throw Error(ErrorCode::InvalidIssue, "issue " + issue.key + " was updated before it was created");
    }
}

std::string issue_text(std::string_view summary, std::string_view description) {
    std::string text(summary);
    if (!description.empty()) {
        text += '\n';
        text += description;
    }
    return text;
}

std::string issue_text(const Issue& issue) {
    return issue_text(issue.summary, issue.description);
}

const Issue* BacklogSnapshot::find(std::string_view key) const {
    auto it = std::lower_bound(issues.begin(), issues.end(), key,
                               [](const Issue& i, std::string_view k) { return i.key < k; });
    if (it != issues.end() && it->key == key) {
        return &*it;
    }
    // Unnormalized snapshots fall back to a linear search.
    auto lin = std::find_if(issues.begin(), issues.end(), [&](const Issue& i) { return i.key == key; });
    return lin == issues.end() ? nullptr : &*lin;
}

BacklogSnapshot normalize(BacklogSnapshot snapshot) {
    std::unordered_set<std::string> seen;
    for (const auto& issue : snapshot.issues) {
        validate(issue);
        if (!seen.insert(issue.key).second) {
            throw Error(ErrorCode::InvalidIssue, "duplicate issue key " + issue.key);
        }
    }
    std::sort(snapshot.issues.begin(), snapshot.issues.end(),
              [](const Issue& x, const Issue& y) { return x.key < y.key; });
    return snapshot;
}

IssuePair canonicalize_pair(std::string_view a, std::string_view b) {
    if (a == b) {
        throw Error(ErrorCode::IdenticalKeys, "pair members are identical: " + std::string(a));
    }
    if (b < a) {
        return IssuePair{std::string(b), std::string(a)};
    }
    return IssuePair{std::string(a), std::string(b)};
}

std::vector<IssuePair> all_pairs(const BacklogSnapshot& snapshot) {
    std::vector<IssuePair> pairs;
    const auto n = snapshot.issues.size();
    pairs.reserve(n * (n > 0 ? n - 1 : 0) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            pairs.push_back(canonicalize_pair(snapshot.issues[i].key, snapshot.issues[j].key));
        }
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

std::string_view to_string(ActionKind kind) {
    switch (kind) {
    case ActionKind::MergeCluster: return "MergeCluster";
    case ActionKind::CreateIssue: return "CreateIssue";
    case ActionKind::UpdateStatus: return "UpdateStatus";
    }
    return "MergeCluster";
}

ActionKind GroomingAction::kind() const {
    return static_cast<ActionKind>(payload.index());
}

void validate(const GroomingAction& action) {
    if (const auto* merge = std::get_if<MergeClusterPayload>(&action.payload)) {
        if (merge->survivor.empty()) {
            throw Error(ErrorCode::InvalidArgument, "merge survivor is empty");
        }
        if (merge->absorbed.empty()) {
            throw Error(ErrorCode::InvalidArgument, "merge of " + merge->survivor + " absorbs nothing");
        }
        if (std::find(merge->absorbed.begin(), merge->absorbed.end(), merge->survivor) !=
            merge->absorbed.end()) {
            throw Error(ErrorCode::InvalidArgument, "merge survivor " + merge->survivor + " is also absorbed");
        }
        if (merge->summary.empty()) {
            throw Error(ErrorCode::InvalidArgument, "merged summary is empty");
        }
    } else if (const auto* create = std::get_if<CreateIssuePayload>(&action.payload)) {
        if (create->summary.empty()) {
            throw Error(ErrorCode::InvalidArgument, "new issue summary is empty");
        }
    } else if (const auto* update = std::get_if<UpdateStatusPayload>(&action.payload)) {
        if (update->key.empty()) {
            throw Error(ErrorCode::InvalidArgument, "status update without a target key");
        }
    }
}

std::string_view to_string(ReviewStatus status) {
    switch (status) {
    case ReviewStatus::Proposed: return "Proposed";
    case ReviewStatus::Accepted: return "Accepted";
    case ReviewStatus::Rejected: return "Rejected";
    case ReviewStatus::Modified: return "Modified";
    }
    return "Proposed";
}

}  // namespace groom
