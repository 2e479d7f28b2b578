#include <gtest/gtest.h>

#include <random>

#include "adlsense/assist_policy.hpp"

using namespace adlsense;

namespace {

BehaviorTable table() {
    BehaviorTable t;
    t.instructions[0] = {"brush.pick_up", "brush.paste", "brush.brush"};
    t.instructions[1] = {"wash.tap"};
    t.reinforcement = {"reinforce.a", "reinforce.b"};
    t.labels = {{0, "brushing_teeth"}, {1, "washing_hands"}};
    return t;
}

AdlDecision decision(AdlType type, std::optional<int> cls, double t, double s = 1.0) {
    AdlDecision d;
    d.type = type;
    d.m_adl = type != AdlType::non_adl;
    d.class_id = cls;
    if (d.m_adl) d.similarity = s;
    d.timestamp = t;
    return d;
}

}  // namespace

TEST(Policy, NonAdlIsSilent) {
    AssistPolicy p(table());
    const auto ev = p.select(decision(AdlType::non_adl, std::nullopt, 0.0));
    EXPECT_EQ(ev.kind, EventKind::none);
    EXPECT_FALSE(ev.message_key);
    EXPECT_FALSE(ev.class_id);
}

TEST(Policy, SeenGivesFirstInstruction) {
    AssistPolicy p(table());
    const auto ev = p.select(decision(AdlType::seen, 0, 1.0));
    EXPECT_EQ(ev.kind, EventKind::instruction);
    EXPECT_EQ(ev.class_id, 0);
    EXPECT_EQ(ev.message_key, "brush.pick_up");
}

TEST(Policy, CooldownSuppressesRepeat) {
    AssistPolicy p(table(), 10.0);
    EXPECT_EQ(p.select(decision(AdlType::seen, 0, 1.0)).kind, EventKind::instruction);
    const auto second = p.select(decision(AdlType::seen, 0, 1.5));
    EXPECT_EQ(second.kind, EventKind::none);
    EXPECT_FALSE(second.message_key);
    const auto later = p.select(decision(AdlType::seen, 0, 11.5));
    EXPECT_EQ(later.kind, EventKind::instruction);
    EXPECT_EQ(later.message_key, "brush.paste");
}

TEST(Policy, StepsClampAndResetOnClassChange) {
    AssistPolicy p(table(), 0.0);
    std::vector<std::string> keys;
    for (int i = 0; i < 5; ++i) keys.push_back(*p.select(decision(AdlType::seen, 0, i)).message_key);
    EXPECT_EQ(keys, (std::vector<std::string>{"brush.pick_up", "brush.paste", "brush.brush", "brush.brush",
                                              "brush.brush"}));
    EXPECT_EQ(p.select(decision(AdlType::seen, 1, 10)).message_key, "wash.tap");
    EXPECT_EQ(p.select(decision(AdlType::seen, 0, 11)).message_key, "brush.pick_up");
}

TEST(Policy, UnseenAndAtypical) {
    AssistPolicy p(table(), 0.0);
    auto ev = p.select(decision(AdlType::unseen, std::nullopt, 1.0));
    EXPECT_EQ(ev.kind, EventKind::reinforcement);
    EXPECT_FALSE(ev.class_id);
    EXPECT_EQ(ev.message_key, "reinforce.a");
    EXPECT_EQ(p.select(decision(AdlType::unseen, std::nullopt, 2.0)).message_key, "reinforce.b");
    ev = p.select(decision(AdlType::atypical, 1, 3.0, 7.5));
    EXPECT_EQ(ev.kind, EventKind::atypical_notice);
    EXPECT_EQ(ev.class_id, 1);
    EXPECT_EQ(ev.message_key, "atypical.washing_hands");
    EXPECT_EQ(ev.similarity, 7.5);
}

TEST(Policy, MissingClassIsError) {
    AssistPolicy p(table());
    EXPECT_THROW(p.select(decision(AdlType::seen, 4, 0.0)), ValidationError);
    EXPECT_THROW(p.select(decision(AdlType::seen, std::nullopt, 0.0)), ValidationError);
}

TEST(Policy, KindIsPureFunctionOfType) {
    EXPECT_EQ(AssistPolicy::kind_for(AdlType::seen), EventKind::instruction);
    EXPECT_EQ(AssistPolicy::kind_for(AdlType::unseen), EventKind::reinforcement);
    EXPECT_EQ(AssistPolicy::kind_for(AdlType::atypical), EventKind::atypical_notice);
    EXPECT_EQ(AssistPolicy::kind_for(AdlType::non_adl), EventKind::none);
}

TEST(Policy, ReplayIsBitIdenticalAndInvariantsHold) {
    std::mt19937_64 rng(12);
    std::vector<AdlDecision> log;
    for (int i = 0; i < 500; ++i) {
        const auto type = static_cast<AdlType>(rng() % 4);
        std::optional<int> cls;
        if (type == AdlType::seen || type == AdlType::atypical) cls = static_cast<int>(rng() % 2);
        log.push_back(decision(type, cls, i * 0.2));
    }
    AssistPolicy a(table()), b(table());
    for (const auto& d : log) {
        const auto ea = a.select(d), eb = b.select(d);
        EXPECT_EQ(to_json(ea).dump(), to_json(eb).dump());
        if (d.type == AdlType::non_adl) {
            EXPECT_EQ(ea.kind, EventKind::none);
        }
        if (ea.kind == EventKind::none) {
            EXPECT_FALSE(ea.message_key);
        } else {
            EXPECT_EQ(ea.kind, AssistPolicy::kind_for(d.type));
        }
        if (ea.kind == EventKind::instruction || ea.kind == EventKind::atypical_notice) {
            EXPECT_TRUE(ea.class_id);
        }
    }
}

TEST(BehaviorFile, LoadsByLabel) {
    const auto t = load_behavior_table(ADLSENSE_DATA_DIR "/behavior.json",
                                       {{"brushing_teeth", 3}, {"eating", 5}, {"not_in_file", 9}});
    EXPECT_EQ(t.instructions.at(3).front(), "brushing_teeth.pick_up_brush");
    EXPECT_EQ(t.instructions.size(), 2u);
    EXPECT_EQ(t.atypical_key(5), "atypical.eating");
    EXPECT_THROW(behavior_table_from_json({{"instructions", {{"eating", nlohmann::json::array()}}},
                                           {"reinforcement", {"r"}}},
                                          {{"eating", 0}}),
                 ValidationError);
}
