#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "adlsense/error.hpp"

namespace adlsense::eval {

inline constexpr const char* kUnseenLabel = "unseen";

struct LabeledSample {
    std::string sample_id;
    std::string subject_id;
    std::string true_class;  // class label or kUnseenLabel
    std::string path;

    friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct PredictionSet {
    std::string method;
    std::map<std::string, std::string> predictions;  // sample_id -> label or kUnseenLabel
};

// Predictions missing for some samples of the evaluated universe.
class CoverageError : public ValidationError {
public:
    explicit CoverageError(std::string method, std::vector<std::string> missing)
        : ValidationError(make_message(method, missing)), missing_(std::move(missing)) {}

    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    static std::string make_message(const std::string& method, const std::vector<std::string>& missing) {
        std::string msg = "predictions \"" + method + "\" miss " + std::to_string(missing.size()) +
                          " sample(s):";
        for (const auto& id : missing) msg += " " + id;
        return msg;
    }

    std::vector<std::string> missing_;
};

namespace detail {

template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(nlohmann::json::parse(line), line_no);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, path + ": " + e.what());
        }
    }
}

}  // namespace detail

// Line-delimited {"sample_id","subject_id","class","path"}.
inline std::vector<LabeledSample> load_labels(const std::string& path) {
    std::vector<LabeledSample> out;
    std::set<std::string> ids;
    detail::for_each_record(path, [&](const nlohmann::json& r, std::size_t line) {
        LabeledSample s{r.at("sample_id").get<std::string>(), r.at("subject_id").get<std::string>(),
                        r.at("class").get<std::string>(), r.value("path", std::string{})};
        if (s.subject_id.empty()) throw ParseError(line, "empty subject_id");
        if (s.true_class.empty()) throw ParseError(line, "empty class");
        if (!ids.insert(s.sample_id).second) throw ParseError(line, "duplicate sample_id " + s.sample_id);
        out.push_back(std::move(s));
    });
    return out;
}

// Header {"method": name}, then line-delimited {"sample_id","class"}.
inline PredictionSet load_predictions(const std::string& path) {
    PredictionSet set;
    bool have_header = false;
    detail::for_each_record(path, [&](const nlohmann::json& r, std::size_t line) {
        if (!have_header) {
            if (!r.contains("method")) throw ParseError(line, "missing {\"method\": ...} header");
            set.method = r["method"].get<std::string>();
            have_header = true;
            return;
        }
        const auto id = r.at("sample_id").get<std::string>();
        if (!set.predictions.emplace(id, r.at("class").get<std::string>()).second) {
            throw ParseError(line, "second prediction for sample " + id);
        }
    });
    if (!have_header) throw ParseError(0, path + ": empty predictions file");
    return set;
}

struct Split {
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> test;
    std::vector<std::string> train_subjects;
    std::vector<std::string> test_subjects;
};

namespace detail {

// Unbiased draw in [0, bound) by rejection; fixed across standard libraries.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

}  // namespace detail

// Subjects are shuffled with the seed and the first round(fraction * n)
// become training subjects (at least one subject on each side).
inline Split cross_subject_split(const std::vector<LabeledSample>& samples, double train_fraction,
                                 std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("train fraction must lie in (0, 1)");
    }
    std::set<std::string> unique;
    for (const auto& s : samples) unique.insert(s.subject_id);
    if (unique.size() < 2) throw ValidationError("cross-subject split needs at least two subjects");
    std::vector<std::string> subjects(unique.begin(), unique.end());
    std::mt19937_64 rng(seed);
    for (std::size_t i = subjects.size(); i > 1; --i) {
        std::swap(subjects[i - 1], subjects[detail::bounded(rng, i)]);
    }
    const auto n = static_cast<double>(subjects.size());
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * n));
    n_train = std::clamp<std::size_t>(n_train, 1, subjects.size() - 1);

    Split split;
    split.train_subjects.assign(subjects.begin(), subjects.begin() + n_train);
    split.test_subjects.assign(subjects.begin() + n_train, subjects.end());
    std::sort(split.train_subjects.begin(), split.train_subjects.end());
    std::sort(split.test_subjects.begin(), split.test_subjects.end());
    const std::set<std::string> train_set(split.train_subjects.begin(), split.train_subjects.end());
    for (const auto& s : samples) {
        (train_set.count(s.subject_id) ? split.train : split.test).push_back(s);
    }
    return split;
}

}  // namespace adlsense::eval
