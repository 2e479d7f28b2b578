#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adlsense/checksum.hpp"
#include "adlsense/error.hpp"
#include "adlsense/fusion.hpp"
#include "adlsense/motion_gate.hpp"

namespace adlsense {

inline constexpr const char* kSpaceFormat = "adlsense-space";
inline constexpr int kSpaceVersion = 1;

struct DecisionPolicy {
    double tau_unseen = 4.0;
    double atypical_z = 2.0;
    std::size_t min_history = 5;
    double epsilon = 1e-6;  // floor for D_k and var_k
    std::size_t min_class_count = 2;

    void validate() const {
        if (!(tau_unseen > 0.0) || !(atypical_z > 0.0) || !(epsilon > 0.0) || min_history < 2 ||
            min_class_count == 0) {
            throw ValidationError("decision policy values must be positive with min_history >= 2");
        }
    }

    friend bool operator==(const DecisionPolicy&, const DecisionPolicy&) = default;
};

enum class AdlType { non_adl, seen, unseen, atypical };

inline std::string to_string(AdlType t) {
    switch (t) {
        case AdlType::non_adl: return "non_adl";
        case AdlType::seen: return "seen";
        case AdlType::unseen: return "unseen";
        case AdlType::atypical: return "atypical";
    }
    return "?";
}

inline AdlType adl_type_from_string(const std::string& s) {
    if (s == "non_adl") return AdlType::non_adl;
    if (s == "seen") return AdlType::seen;
    if (s == "unseen") return AdlType::unseen;
    if (s == "atypical") return AdlType::atypical;
    throw ValidationError("unknown ADL type \"" + s + "\"");
}

struct ClassStats {
    int class_id = 0;
    AdlEmbedding centroid{};
    std::size_t count = 0;
    double mean_dist = 0.0;  // D_k: mean distance of members to the centroid
    double variance = 0.0;   // var_k: mean squared distance to the centroid
    double m2 = 0.0;         // sum of squared distances, kept for streaming updates

    friend bool operator==(const ClassStats&, const ClassStats&) = default;
};

inline double euclidean(const AdlEmbedding& a, const AdlEmbedding& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Statistics recomputed from scratch over the member list.
inline ClassStats batch_stats(int class_id, const std::vector<AdlEmbedding>& members) {
    ClassStats st;
    st.class_id = class_id;
    st.count = members.size();
    if (members.empty()) return st;
    for (const auto& e : members) {
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) st.centroid[i] += e[i];
    }
    for (auto& c : st.centroid) c /= static_cast<double>(members.size());
    for (const auto& e : members) {
        const double d = euclidean(e, st.centroid);
        st.mean_dist += d;
        st.m2 += d * d;
    }
    st.mean_dist /= static_cast<double>(members.size());
    st.variance = st.m2 / static_cast<double>(members.size());
    return st;
}

struct Similarity {
    double score = 0.0;  // S; lower is more similar
    int class_id = 0;    // nearest centroid, ties to the lowest id
    double d_min = 0.0;
    bool floored = false;  // D_k or var_k was raised to epsilon
};

struct HistoryEntry {
    double timestamp = 0.0;
    int class_id = 0;
    double score = 0.0;
    AdlType type = AdlType::seen;

    friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct AdlDecision {
    bool m_adl = false;
    AdlType type = AdlType::non_adl;
    std::optional<int> class_id;
    std::optional<double> similarity;
    double timestamp = 0.0;

    // diagnostics
    std::optional<int> nearest_class;
    std::optional<double> d_min;
    std::optional<int> head_class;
    std::optional<double> atypical_threshold;
    bool floored = false;

    friend bool operator==(const AdlDecision&, const AdlDecision&) = default;
};

class EmbeddingSpace {
public:
    struct ClassEntry {
        std::string label;
        std::vector<AdlEmbedding> members;
        ClassStats stats;
    };

    EmbeddingSpace() = default;

    // Builds E from labeled training embeddings.
    static EmbeddingSpace init(std::string user_id,
                               const std::vector<std::pair<int, AdlEmbedding>>& labeled,
                               GateThresholds gate, DecisionPolicy policy,
                               const std::map<int, std::string>& labels = {}) {
        policy.validate();
        if (labeled.empty()) throw ValidationError("cannot initialise an embedding space from no data");
        EmbeddingSpace space;
        space.user_id_ = std::move(user_id);
        space.gate_ = gate;
        space.policy_ = policy;
        for (const auto& [cls, e] : labeled) space.classes_[cls].members.push_back(e);
        for (auto& [cls, entry] : space.classes_) {
            if (entry.members.size() < policy.min_class_count) {
                throw ValidationError("class " + std::to_string(cls) + " has " +
                                      std::to_string(entry.members.size()) + " embedding(s), needs " +
                                      std::to_string(policy.min_class_count));
            }
            const auto it = labels.find(cls);
            entry.label = it != labels.end() ? it->second : "class_" + std::to_string(cls);
            entry.stats = batch_stats(cls, entry.members);
        }
        return space;
    }

    const std::string& user_id() const noexcept { return user_id_; }
    const GateThresholds& gate() const noexcept { return gate_; }
    const DecisionPolicy& policy() const noexcept { return policy_; }
    void set_policy(const DecisionPolicy& p) {
        p.validate();
        policy_ = p;
    }
    void set_gate(const GateThresholds& g) { gate_ = g; }
    const std::map<int, ClassEntry>& classes() const noexcept { return classes_; }
    const std::vector<HistoryEntry>& history() const noexcept { return history_; }
    bool empty() const noexcept { return classes_.empty(); }

    const ClassStats& stats(int class_id) const { return entry(class_id).stats; }
    const std::string& label(int class_id) const { return entry(class_id).label; }

    std::optional<int> find_label(const std::string& label) const {
        for (const auto& [cls, e] : classes_) {
            if (e.label == label) return cls;
        }
        return std::nullopt;
    }

    // Appends e to a class and updates centroid and var_k in streaming form;
    // D_k depends on the moved centroid and is re-summed over the members.
    void add_embedding(int class_id, const AdlEmbedding& e, bool create = false,
                       const std::string& label = {}) {
        auto it = classes_.find(class_id);
        if (it == classes_.end()) {
            if (!create) throw ValidationError("unknown class " + std::to_string(class_id));
            it = classes_.emplace(class_id, ClassEntry{}).first;
            it->second.label = label.empty() ? "class_" + std::to_string(class_id) : label;
            it->second.stats.class_id = class_id;
        }
        auto& entry = it->second;
        auto& st = entry.stats;
        entry.members.push_back(e);
        st.count += 1;
        const auto n = static_cast<double>(st.count);
        double cross = 0.0;
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
            const double before = e[i] - st.centroid[i];
            st.centroid[i] += before / n;
            cross += before * (e[i] - st.centroid[i]);
        }
        st.m2 += cross;
        if (st.m2 < 0.0) st.m2 = 0.0;
        st.variance = st.m2 / n;
        double dist = 0.0;
        for (const auto& m : entry.members) dist += euclidean(m, st.centroid);
        st.mean_dist = dist / n;
    }

    Similarity similarity(const AdlEmbedding& e) const {
        if (classes_.empty()) throw ValidationError("similarity against an empty embedding space");
        Similarity s;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [cls, entry] : classes_) {
            const double d = euclidean(e, entry.stats.centroid);
            if (d < best) {  // strict: ties keep the lower id (map order)
                best = d;
                s.class_id = cls;
            }
        }
        const auto& st = classes_.at(s.class_id).stats;
        const double dk = std::max(st.mean_dist, policy_.epsilon);
        const double var = std::max(st.variance, policy_.epsilon);
        s.floored = st.mean_dist < policy_.epsilon || st.variance < policy_.epsilon;
        s.d_min = best;
        s.score = (best / dk) * (1.0 / var);
        return s;
    }

    // Decides against the current state and appends to the S history.
    AdlDecision decide(bool m_adl, const std::optional<AdlEmbedding>& e,
                       std::optional<int> head_class, double now) {
        if (!history_.empty() && now < history_.back().timestamp) {
            throw ValidationError("decision time " + std::to_string(now) +
                                  " precedes the last history entry");
        }
        auto d = evaluate(m_adl, e, head_class, now);
        if (d.type == AdlType::seen || d.type == AdlType::atypical) {
            history_.push_back({now, *d.class_id, *d.similarity, d.type});
        }
        return d;
    }

    // Same rule as decide() without touching the history.
    AdlDecision decide_snapshot(bool m_adl, const std::optional<AdlEmbedding>& e,
                                std::optional<int> head_class, double now) const {
        return evaluate(m_adl, e, head_class, now);
    }

    // S values of prior seen decisions for one class, oldest first.
    std::vector<double> seen_scores(int class_id) const {
        std::vector<double> out;
        for (const auto& h : history_) {
            if (h.class_id == class_id && h.type == AdlType::seen) out.push_back(h.score);
        }
        return out;
    }

    nlohmann::json to_json() const;
    static EmbeddingSpace from_json(const nlohmann::json& j);

private:
    const ClassEntry& entry(int class_id) const {
        const auto it = classes_.find(class_id);
        if (it == classes_.end()) throw ValidationError("unknown class " + std::to_string(class_id));
        return it->second;
    }

    AdlDecision evaluate(bool m_adl, const std::optional<AdlEmbedding>& e,
                         std::optional<int> head_class, double now) const {
        AdlDecision d;
        d.timestamp = now;
        d.head_class = head_class;
        d.m_adl = m_adl;
        if (!m_adl) return d;
        if (!e) throw ValidationError("ADL motion decision requires an ADL embedding");
        const auto sim = similarity(*e);
        d.similarity = sim.score;
        d.nearest_class = sim.class_id;
        d.d_min = sim.d_min;
        d.floored = sim.floored;
        if (sim.score > policy_.tau_unseen) {
            d.type = AdlType::unseen;
            return d;
        }
        d.class_id = sim.class_id;
        d.type = AdlType::seen;
        const auto prior = seen_scores(sim.class_id);
        if (prior.size() >= policy_.min_history) {
            double mean = 0.0;
            for (double v : prior) mean += v;
            mean /= static_cast<double>(prior.size());
            double ss = 0.0;
            for (double v : prior) ss += (v - mean) * (v - mean);
            const double sd = std::sqrt(ss / static_cast<double>(prior.size() - 1));
            d.atypical_threshold = mean + policy_.atypical_z * sd;
            if (sim.score > *d.atypical_threshold) d.type = AdlType::atypical;
        }
        return d;
    }

    std::string user_id_;
    std::map<int, ClassEntry> classes_;
    std::vector<HistoryEntry> history_;
    GateThresholds gate_;
    DecisionPolicy policy_;
};

// 99th-percentile (by default) of S over held-out embeddings.
inline double calibrate_unseen_threshold(const EmbeddingSpace& space,
                                         const std::vector<AdlEmbedding>& held_out,
                                         double pct = 99.0) {
    if (held_out.empty()) throw ValidationError("no held-out embeddings for threshold calibration");
    std::vector<double> scores;
    scores.reserve(held_out.size());
    for (const auto& e : held_out) scores.push_back(space.similarity(e).score);
    return percentile(std::move(scores), pct);
}

inline nlohmann::json to_json(const DecisionPolicy& p) {
    return {{"tau_unseen", p.tau_unseen},
            {"atypical_z", p.atypical_z},
            {"min_history", p.min_history},
            {"epsilon", p.epsilon},
            {"min_class_count", p.min_class_count}};
}

inline DecisionPolicy policy_from_json(const nlohmann::json& j) {
    DecisionPolicy p;
    p.tau_unseen = j.at("tau_unseen").get<double>();
    p.atypical_z = j.at("atypical_z").get<double>();
    p.min_history = j.at("min_history").get<std::size_t>();
    p.epsilon = j.at("epsilon").get<double>();
    p.min_class_count = j.at("min_class_count").get<std::size_t>();
    p.validate();
    return p;
}

inline nlohmann::json to_json(const AdlDecision& d) {
    nlohmann::json j = {{"t", d.timestamp}, {"m_adl", d.m_adl}, {"adl_type", to_string(d.type)}};
    if (d.class_id) j["class_id"] = *d.class_id;
    if (d.similarity) j["similarity"] = *d.similarity;
    if (d.nearest_class) j["nearest_class"] = *d.nearest_class;
    if (d.d_min) j["d_min"] = *d.d_min;
    if (d.head_class) j["head_class"] = *d.head_class;
    if (d.atypical_threshold) j["atypical_threshold"] = *d.atypical_threshold;
    if (d.floored) j["floored"] = true;
    return j;
}

inline AdlDecision decision_from_json(const nlohmann::json& j) {
    AdlDecision d;
    d.timestamp = j.at("t").get<double>();
    d.m_adl = j.at("m_adl").get<bool>();
    d.type = adl_type_from_string(j.at("adl_type").get<std::string>());
    if (j.contains("class_id")) d.class_id = j["class_id"].get<int>();
    if (j.contains("similarity")) d.similarity = j["similarity"].get<double>();
    if (j.contains("nearest_class")) d.nearest_class = j["nearest_class"].get<int>();
    if (j.contains("d_min")) d.d_min = j["d_min"].get<double>();
    if (j.contains("head_class")) d.head_class = j["head_class"].get<int>();
    if (j.contains("atypical_threshold")) d.atypical_threshold = j["atypical_threshold"].get<double>();
    d.floored = j.value("floored", false);
    return d;
}

inline nlohmann::json EmbeddingSpace::to_json() const {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& [cls, e] : classes_) {
        classes.push_back({{"id", cls},
                           {"label", e.label},
                           {"members", e.members},
                           {"stats",
                            {{"centroid", e.stats.centroid},
                             {"count", e.stats.count},
                             {"mean_dist", e.stats.mean_dist},
                             {"variance", e.stats.variance},
                             {"m2", e.stats.m2}}}});
    }
    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : history_) {
        history.push_back(
            {{"t", h.timestamp}, {"class_id", h.class_id}, {"s", h.score}, {"type", to_string(h.type)}});
    }
    return {{"format", kSpaceFormat},
            {"version", kSpaceVersion},
            {"user_id", user_id_},
            {"classes", std::move(classes)},
            {"s_history", std::move(history)},
            {"gate", adlsense::to_json(gate_)},
            {"policy", adlsense::to_json(policy_)}};
}

namespace detail {

inline AdlEmbedding embedding_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != kEmbeddingDim) {
        throw CorruptionError(where + ": expected " + std::to_string(kEmbeddingDim) + " values, found " +
                              std::to_string(j.is_array() ? j.size() : 0));
    }
    AdlEmbedding e{};
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        if (!j[i].is_number()) throw CorruptionError(where + "[" + std::to_string(i) + "] is not a number");
        e[i] = j[i].get<double>();
    }
    return e;
}

}  // namespace detail

inline EmbeddingSpace EmbeddingSpace::from_json(const nlohmann::json& j) {
    EmbeddingSpace space;
    std::string where = "snapshot";
    try {
        space.user_id_ = j.at("user_id").get<std::string>();
        where = "gate";
        space.gate_ = gate_from_json(j.at("gate"));
        where = "policy";
        space.policy_ = policy_from_json(j.at("policy"));
        const auto& classes = j.at("classes");
        for (std::size_t ci = 0; ci < classes.size(); ++ci) {
            where = "classes[" + std::to_string(ci) + "]";
            const auto& c = classes[ci];
            const int id = c.at("id").get<int>();
            if (space.classes_.count(id)) throw CorruptionError(where + ": duplicate class id");
            ClassEntry entry;
            entry.label = c.at("label").get<std::string>();
            const auto& members = c.at("members");
            for (std::size_t mi = 0; mi < members.size(); ++mi) {
                entry.members.push_back(detail::embedding_from_json(
                    members[mi], where + ".members[" + std::to_string(mi) + "]"));
            }
            const auto& s = c.at("stats");
            entry.stats.class_id = id;
            entry.stats.centroid = detail::embedding_from_json(s.at("centroid"), where + ".stats.centroid");
            entry.stats.count = s.at("count").get<std::size_t>();
            entry.stats.mean_dist = s.at("mean_dist").get<double>();
            entry.stats.variance = s.at("variance").get<double>();
            entry.stats.m2 = s.at("m2").get<double>();
            const auto batch = batch_stats(id, entry.members);
            bool consistent = batch.count == entry.stats.count && entry.stats.count > 0 &&
                              std::abs(batch.mean_dist - entry.stats.mean_dist) <= 1e-9 &&
                              std::abs(batch.variance - entry.stats.variance) <= 1e-9;
            for (std::size_t i = 0; consistent && i < kEmbeddingDim; ++i) {
                consistent = std::abs(batch.centroid[i] - entry.stats.centroid[i]) <= 1e-9;
            }
            if (!consistent) throw CorruptionError(where + ": stored statistics disagree with members");
            space.classes_.emplace(id, std::move(entry));
        }
        const auto& history = j.at("s_history");
        for (std::size_t hi = 0; hi < history.size(); ++hi) {
            where = "s_history[" + std::to_string(hi) + "]";
            const auto& h = history[hi];
            HistoryEntry entry{h.at("t").get<double>(), h.at("class_id").get<int>(),
                               h.at("s").get<double>(),
                               adl_type_from_string(h.at("type").get<std::string>())};
            if (!space.history_.empty() && entry.timestamp < space.history_.back().timestamp) {
                throw CorruptionError(where + ": timestamps not monotone");
            }
            space.history_.push_back(entry);
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(where + ": " + e.what());
    } catch (const ValidationError& e) {
        throw CorruptionError(where + ": " + e.what());
    }
    return space;
}

inline std::string encode_space(const EmbeddingSpace& space) {
    auto j = space.to_json();
    j["checksum"] = fnv1a64_hex(j.dump());
    return j.dump() + "\n";
}

inline EmbeddingSpace decode_space(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw CorruptionError("space snapshot malformed or truncated at byte " +
                              std::to_string(e.byte) + ": " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != kSpaceFormat) {
        throw VersionError("not an adlsense-space snapshot");
    }
    const int version = j.value("version", -1);
    if (version != kSpaceVersion) {
        throw VersionError("space snapshot version " + std::to_string(version) +
                           " not supported (expected " + std::to_string(kSpaceVersion) + ")");
    }
    if (!j.contains("checksum") || !j["checksum"].is_string()) {
        throw CorruptionError("space snapshot has no checksum");
    }
    const auto stored = j["checksum"].get<std::string>();
    j.erase("checksum");
    const auto actual = fnv1a64_hex(j.dump());
    if (stored != actual) {
        throw CorruptionError("space snapshot checksum mismatch (stored " + stored + ", computed " +
                              actual + ")");
    }
    return EmbeddingSpace::from_json(j);
}

// Written to a sibling temp file and renamed, so readers never see a partial snapshot.
inline void save_space(const EmbeddingSpace& space, const std::string& path) {
    const std::string tmp =
        path + ".tmp" + std::to_string(std::random_device{}());
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write space snapshot " + path);
        out << encode_space(space);
        out.flush();
        if (!out) {
            std::remove(tmp.c_str());
            throw IoError("write failed for " + path);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw IoError("cannot replace " + path + ": " + ec.message());
    }
}

inline EmbeddingSpace load_space(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open space snapshot " + path);
    return decode_space({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

}  // namespace adlsense
