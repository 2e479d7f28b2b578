#pragma once

#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adlsense/error.hpp"
#include "adlsense/state_estimator.hpp"

namespace adlsense {

enum class EventKind { none, instruction, reinforcement, atypical_notice };

inline std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::none: return "none";
        case EventKind::instruction: return "instruction";
        case EventKind::reinforcement: return "reinforcement";
        case EventKind::atypical_notice: return "atypical_notice";
    }
    return "?";
}

struct AssistEvent {
    EventKind kind = EventKind::none;
    std::optional<int> class_id;
    std::optional<std::string> message_key;
    double timestamp = 0.0;
    std::optional<double> similarity;  // attached to atypical notices

    friend bool operator==(const AssistEvent&, const AssistEvent&) = default;
};

// Message keys the robot layer resolves to speech and gestures.
struct BehaviorTable {
    std::map<int, std::vector<std::string>> instructions;  // ordered per class
    std::vector<std::string> reinforcement;
    std::string atypical_template = "atypical.{label}";   // {label} and {class_id} are substituted
    std::map<int, std::string> labels;

    void validate() const {
        for (const auto& [cls, keys] : instructions) {
            if (keys.empty()) {
                throw ValidationError("behavior table: class " + std::to_string(cls) +
                                      " has no instruction keys");
            }
        }
        if (reinforcement.empty()) throw ValidationError("behavior table: no reinforcement keys");
    }

    std::string atypical_key(int class_id) const {
        std::string key = atypical_template;
        const auto label_it = labels.find(class_id);
        const std::string label =
            label_it != labels.end() ? label_it->second : "class_" + std::to_string(class_id);
        for (const auto& [tok, value] :
             {std::pair<std::string, std::string>{"{label}", label},
              std::pair<std::string, std::string>{"{class_id}", std::to_string(class_id)}}) {
            for (auto pos = key.find(tok); pos != std::string::npos; pos = key.find(tok, pos)) {
                key.replace(pos, tok.size(), value);
                pos += value.size();
            }
        }
        return key;
    }
};

// File layout, keyed by class label:
//   {"instructions": {"<label>": ["key", ...]}, "reinforcement": ["key", ...],
//    "atypical": "atypical.{label}"}
// Labels are resolved to class ids through `label_to_id`; unknown labels are skipped.
inline BehaviorTable behavior_table_from_json(const nlohmann::json& j,
                                              const std::map<std::string, int>& label_to_id) {
    BehaviorTable table;
    try {
        for (const auto& [label, keys] : j.at("instructions").items()) {
            const auto it = label_to_id.find(label);
            if (it == label_to_id.end()) continue;
            table.instructions[it->second] = keys.get<std::vector<std::string>>();
            table.labels[it->second] = label;
        }
        table.reinforcement = j.at("reinforcement").get<std::vector<std::string>>();
        table.atypical_template = j.value("atypical", table.atypical_template);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(1, std::string("behavior table: ") + e.what());
    }
    table.validate();
    return table;
}

inline BehaviorTable load_behavior_table(const std::string& path,
                                         const std::map<std::string, int>& label_to_id) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open behavior table " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(1, std::string("behavior table: ") + e.what());
    }
    return behavior_table_from_json(j, label_to_id);
}

// Cooldown and instruction-sequencing state for one user's event stream.
class AssistPolicy {
public:
    explicit AssistPolicy(BehaviorTable table, double cooldown = 10.0)
        : table_(std::move(table)), cooldown_(cooldown) {
        table_.validate();
        if (!(cooldown_ >= 0.0)) throw ValidationError("cooldown must be non-negative");
    }

    const BehaviorTable& table() const noexcept { return table_; }

    // Event kind before cooldown suppression.
    static EventKind kind_for(AdlType type) noexcept {
        switch (type) {
            case AdlType::seen: return EventKind::instruction;
            case AdlType::unseen: return EventKind::reinforcement;
            case AdlType::atypical: return EventKind::atypical_notice;
            case AdlType::non_adl: break;
        }
        return EventKind::none;
    }

    AssistEvent select(const AdlDecision& decision) {
        AssistEvent ev;
        ev.timestamp = decision.timestamp;
        const EventKind kind = kind_for(decision.type);
        if (kind == EventKind::none) return ev;

        const std::optional<int> cls =
            kind == EventKind::reinforcement ? std::nullopt : decision.class_id;
        if (kind != EventKind::reinforcement) {
            if (!cls) throw ValidationError("decision of type " + to_string(decision.type) +
                                            " lacks a class id");
            if (!table_.instructions.count(*cls)) {
                throw ValidationError("class " + std::to_string(*cls) + " missing from behavior table");
            }
        }
        if (cls != episode_class_) {
            episode_class_ = cls;
            step_ = 0;
        }
        if (last_ && last_->kind == kind && last_->class_id == cls &&
            decision.timestamp - last_->timestamp < cooldown_) {
            return ev;
        }

        ev.kind = kind;
        ev.class_id = cls;
        switch (kind) {
            case EventKind::instruction: {
                const auto& keys = table_.instructions.at(*cls);
                ev.message_key = keys[std::min(step_, keys.size() - 1)];
                ++step_;
                break;
            }
            case EventKind::reinforcement:
                ev.message_key = table_.reinforcement[reinforcement_count_++ % table_.reinforcement.size()];
                break;
            case EventKind::atypical_notice:
                ev.message_key = table_.atypical_key(*cls);
                ev.similarity = decision.similarity;
                break;
            case EventKind::none: break;
        }
        last_ = ev;
        return ev;
    }

private:
    BehaviorTable table_;
    double cooldown_;
    std::optional<AssistEvent> last_;
    std::optional<int> episode_class_;
    std::size_t step_ = 0;
    std::size_t reinforcement_count_ = 0;
};

inline nlohmann::json to_json(const AssistEvent& ev) {
    nlohmann::json j = {{"t", ev.timestamp}, {"kind", to_string(ev.kind)}};
    if (ev.class_id) j["class_id"] = *ev.class_id;
    if (ev.message_key) j["message_key"] = *ev.message_key;
    if (ev.similarity) j["similarity"] = *ev.similarity;
    return j;
}

}  // namespace adlsense
