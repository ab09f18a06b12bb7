#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace sollu {

// Syllable classes 1..31 plus the stick class; `unknown` marks a slice that
// could not be recognized.
enum class Bol : std::uint8_t {
    unknown = 0,
    a, da, dha, dhat, dhi, dhin, dhit, ding, e, gadu, gin, ha, hat, hi, jag, jham,
    ka, ki, ku, na, ri, ta, tak, tam, tan, tat, tei, tom, tta, ya, yum,
    stick
};

inline constexpr int kStickCode = 32;
inline constexpr int kStickAlias = 99;
inline constexpr std::size_t kBolClasses = 32;

inline constexpr std::array<std::string_view, 33> kBolLabels = {
    "undef", "a",   "da",  "dha",  "dhat", "dhi", "dhin", "dhit", "ding", "e",   "gadu",
    "gin",   "ha",  "hat", "hi",   "jag",  "jham", "ka",  "ki",   "ku",   "na",  "ri",
    "ta",    "tak", "tam", "tan",  "tat",  "tei", "tom",  "tta",  "ya",   "yum", "stick"};

inline constexpr int code(Bol b) { return int(b); }

inline constexpr std::string_view label(Bol b) { return kBolLabels[std::size_t(b)]; }

inline constexpr bool is_syllable(Bol b) { return b != Bol::unknown && b != Bol::stick; }

inline std::optional<Bol> bol_from_code(int c)
{
    if (c == kStickAlias)
        return Bol::stick;
    if (c < 0 || c > kStickCode)
        return std::nullopt;
    return Bol(c);
}

inline std::optional<Bol> bol_from_label(std::string_view s)
{
    if (s == "_" || s == "\xE2\x8A\xA5") // U+22A5
        return Bol::stick;
    if (s == "\xE2\x8A\xA4") // U+22A4
        return Bol::unknown;
    for (std::size_t i = 0; i < kBolLabels.size(); ++i)
        if (kBolLabels[i] == s)
            return Bol(i);
    return std::nullopt;
}

enum class BeatType : std::uint8_t { B, HB, QB, Stick, Undef };

inline constexpr std::string_view to_string(BeatType t)
{
    switch (t) {
    case BeatType::B: return "B";
    case BeatType::HB: return "HB";
    case BeatType::QB: return "QB";
    case BeatType::Stick: return "STICK";
    case BeatType::Undef: return "UNDEF";
    }
    return "UNDEF";
}

inline std::optional<BeatType> beat_type_from_string(std::string_view s)
{
    if (s == "B") return BeatType::B;
    if (s == "HB") return BeatType::HB;
    if (s == "QB") return BeatType::QB;
    if (s == "STICK" || s == "\xE2\x8A\xA5") return BeatType::Stick;
    if (s == "UNDEF" || s == "\xE2\x8A\xA4") return BeatType::Undef;
    return std::nullopt;
}

} // namespace sollu
