#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace adlsense {

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
inline std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace adlsense
