#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adlsense/error.hpp"
#include "adlsense/skeleton.hpp"

namespace adlsense {

inline constexpr const char* kSessionFormat = "adlsense-session";
inline constexpr int kSessionVersion = 1;

struct Session {
    double fps = 30.0;
    std::vector<SkeletonFrame> frames;
};

namespace detail {

inline SkeletonFrame frame_from_json(const nlohmann::json& rec, std::size_t frame_index) {
    const auto name = "frame " + std::to_string(frame_index);
    if (!rec.is_object() || !rec.contains("t") || !rec.contains("joints")) {
        throw ValidationError(name + ": record needs \"t\" and \"joints\"");
    }
    SkeletonFrame f;
    if (!rec["t"].is_number()) throw ValidationError(name + ": \"t\" is not a number");
    f.timestamp = rec["t"].get<double>();
    const auto& joints = rec["joints"];
    if (!joints.is_array() || joints.size() != kJointCount) {
        throw ValidationError(name + ": expected " + std::to_string(kJointCount) + " joints, found " +
                              std::to_string(joints.is_array() ? joints.size() : 0));
    }
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const auto& p = joints[j];
        if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
            !p[2].is_number()) {
            throw ValidationError(name + ": joint " + std::to_string(j) + " is not [x,y,z]");
        }
        f.joints[j] = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
    }
    if (rec.contains("conf")) {
        const auto& c = rec["conf"];
        if (!c.is_array() || c.size() != kJointCount) {
            throw ValidationError(name + ": \"conf\" must hold " + std::to_string(kJointCount) +
                                  " values");
        }
        std::array<double, kJointCount> conf{};
        for (std::size_t j = 0; j < kJointCount; ++j) conf[j] = c[j].get<double>();
        f.confidence = conf;
    }
    if (rec.contains("video")) f.video_ref = rec["video"].get<std::string>();
    if (rec.contains("image")) f.image_ref = rec["image"].get<std::string>();
    try {
        validate_frame(f);
    } catch (const ValidationError& e) {
        throw ValidationError(name + ": " + e.what());
    }
    return f;
}

inline nlohmann::json frame_to_json(const SkeletonFrame& f) {
    nlohmann::json joints = nlohmann::json::array();
    for (const auto& p : f.joints) joints.push_back({p.x, p.y, p.z});
    nlohmann::json rec = {{"t", f.timestamp}, {"joints", std::move(joints)}};
    if (f.confidence) rec["conf"] = *f.confidence;
    if (f.video_ref) rec["video"] = *f.video_ref;
    if (f.image_ref) rec["image"] = *f.image_ref;
    return rec;
}

}  // namespace detail

inline Session parse_session(std::istream& in) {
    Session session;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line_no, e.what());
        }
        if (!have_header) {
            if (!rec.is_object() || rec.value("format", "") != kSessionFormat) {
                throw ParseError(line_no, "missing adlsense-session header");
            }
            const int version = rec.value("version", -1);
            if (version != kSessionVersion) {
                throw VersionError("session version " + std::to_string(version) +
                                   " not supported (expected " + std::to_string(kSessionVersion) +
                                   ")");
            }
            session.fps = rec.value("fps", 30.0);
            have_header = true;
            continue;
        }
        try {
            session.frames.push_back(detail::frame_from_json(rec, session.frames.size()));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
    if (!have_header) throw ParseError(line_no, "empty session file (no header)");
    return session;
}

inline Session load_session(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open session file " + path);
    return parse_session(in);
}

inline void write_session(const std::string& path, const Session& session) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write session file " + path);
    const nlohmann::json header = {
        {"format", kSessionFormat}, {"version", kSessionVersion}, {"fps", session.fps}};
    out << header.dump() << '\n';
    for (const auto& f : session.frames) out << detail::frame_to_json(f).dump() << '\n';
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace adlsense
