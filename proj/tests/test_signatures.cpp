#include <sstream>

#include <gtest/gtest.h>

#include <sollu/signatures.hpp>

using namespace sollu;

namespace {

const std::vector<SollukattuSignature>& dict()
{
    static const auto d = load_dictionary(SOLLU_DATA_DIR "/sollukattu.dict");
    return d;
}

} // namespace

TEST(Bol, CodesAndLabels)
{
    EXPECT_EQ(code(Bol::dhit), 7);
    EXPECT_EQ(code(Bol::tei), 27);
    EXPECT_EQ(code(Bol::stick), kStickCode);
    EXPECT_EQ(bol_from_code(kStickAlias), Bol::stick);
    EXPECT_FALSE(bol_from_code(33).has_value());
    for (int c = 0; c <= kStickCode; ++c)
        EXPECT_EQ(bol_from_label(label(*bol_from_code(c))), bol_from_code(c));
    EXPECT_EQ(beat_type_from_string("HB"), BeatType::HB);
    EXPECT_FALSE(beat_type_from_string("XB").has_value());
}

TEST(Dictionary, StockPatterns)
{
    ASSERT_EQ(dict().size(), 9u);
    const auto& natta = find_signature(dict(), "Natta");
    EXPECT_EQ(natta.bols().size(), 14u);
    EXPECT_EQ(natta.lambda, 8);
    const auto& tirmana = find_signature(dict(), "Tirmana A");
    EXPECT_EQ(tirmana.bars, 2);
    EXPECT_EQ(tirmana.beats(), 12u);
    EXPECT_EQ(tirmana.bols().size(), 14u);
    EXPECT_EQ(find_signature(dict(), "KUMS").recurrence, 6);
    EXPECT_THROW(find_signature(dict(), "Nope"), DictionaryError);

    const auto& jb = find_signature(dict(), "Joining B");
    const auto types = jb.bol_beat_types();
    ASSERT_EQ(types.size(), 12u);
    EXPECT_EQ(types[0], BeatType::B);
    EXPECT_EQ(types[1], BeatType::HB);
    EXPECT_EQ(types[2], BeatType::B);
    EXPECT_EQ(jb.slots[1].offset, 0.5);
}

TEST(Dictionary, SticksAreNotBols)
{
    const auto& ka = find_signature(dict(), "Kuditta Nattal A");
    EXPECT_EQ(ka.slots.size(), 8u);
    EXPECT_EQ(ka.bols().size(), 6u);
    EXPECT_EQ(ka.slots[3].type, BeatType::Stick);
}

TEST(Dictionary, QuarterBeats)
{
    const auto s = parse_signature_record("Q | 6 | [ta ka dhi ki] [ta] [ta] [ta] [ta] [ta]");
    ASSERT_EQ(s.slots.size(), 9u);
    EXPECT_EQ(s.slots[1].type, BeatType::QB);
    EXPECT_EQ(s.slots[1].offset, 0.25);
    EXPECT_EQ(s.slots[2].type, BeatType::HB);
    EXPECT_EQ(s.slots[3].offset, 0.75);
}

TEST(Dictionary, RejectsMalformedRecords)
{
    EXPECT_THROW(parse_signature_record("X | 7 | [ta] [ta] [ta] [ta] [ta] [ta] [ta]"), DictionaryError);
    EXPECT_THROW(parse_signature_record("X | 6 | [ta] [ta]"), DictionaryError);
    EXPECT_THROW(parse_signature_record("X | 6 | [ta ka tei] [ta] [ta] [ta] [ta] [ta]"), DictionaryError);
    EXPECT_THROW(parse_signature_record("X | 6 | [bogus] [ta] [ta] [ta] [ta] [ta]"), DictionaryError);
    EXPECT_THROW(parse_signature_record("X | 6 | [ta:HB] [ta] [ta] [ta] [ta] [ta]"), DictionaryError);
    EXPECT_THROW(parse_signature_record("X | 6 | [_] [_] [_] [_] [_] [_]"), DictionaryError);
    EXPECT_THROW(parse_signature_record("X | 6 | [ta] [ta] [ta] [ta] [ta] [ta"), DictionaryError);
    EXPECT_THROW(parse_signature_record("X | 6"), DictionaryError);
    std::istringstream dup("A | 6 | [ta] [ta] [ta] [ta] [ta] [ta]\nA | 6 | [ta] [ta] [ta] [ta] [ta] [ta]\n");
    EXPECT_THROW(parse_dictionary(dup), DictionaryError);
}

TEST(Dictionary, ExplicitTagsAndFormatRoundTrip)
{
    const auto s = parse_signature_record(
        "T | 6 | 6 | 1 | [ta ka:QB dhi:HB ki:QB] [ta ki:QB tom:HB] [_] [ta] [ta] [ta]");
    EXPECT_EQ(s.slots[1].offset, 0.25);
    EXPECT_EQ(s.slots[2].offset, 0.5);
    EXPECT_EQ(s.slots[3].offset, 0.75);
    EXPECT_EQ(s.slots[5].type, BeatType::QB);
    for (const auto& orig : dict()) {
        const auto back = parse_signature_record(format_signature_record(orig));
        EXPECT_EQ(back.name, orig.name);
        EXPECT_EQ(back.bols(), orig.bols());
        EXPECT_EQ(back.beat_types(), orig.beat_types());
    }
}

TEST(Recognition, ExtendRepeatsAndTruncates)
{
    const std::vector<int> z = {1, 2, 3};
    EXPECT_EQ(extend_signature<int>(z, 7), (std::vector<int>{1, 2, 3, 1, 2, 3, 1}));
    EXPECT_EQ(extend_signature<int>(z, 2), (std::vector<int>{1, 2}));
    EXPECT_THROW(extend_signature<int>(std::vector<int>{}, 2), Error);
}

TEST(Recognition, EveryPatternRecognizesItself)
{
    for (const auto& s : dict()) {
        const auto gamma = extend_signature(s, 2 * s.bols().size());
        const auto r = recognize_sollukattu(gamma, dict());
        EXPECT_EQ(r.name, s.name);
        EXPECT_EQ(r.distance, 0u);
        EXPECT_TRUE(r.ties.empty()) << s.name;
        EXPECT_EQ(r.table.size(), dict().size());
        for (std::size_t i = 1; i < r.table.size(); ++i)
            EXPECT_LE(r.table[i - 1].distance, r.table[i].distance);
    }
}

TEST(Recognition, DropsSticksAndUnknownsAndReportsTies)
{
    SignalSignature ss;
    for (Bol b : {Bol::tei, Bol::stick, Bol::unknown, Bol::a, Bol::tei, Bol::e})
        ss.events.push_back({b, 0, 0});
    EXPECT_EQ(ss.string_view(), (std::vector<Bol>{Bol::tei, Bol::a, Bol::tei, Bol::e}));
    EXPECT_EQ(ss.string_positions(), (std::vector<std::size_t>{0, 3, 4, 5}));
    EXPECT_EQ(recognize_sollukattu(ss, dict()).name, "Sarika");

    SignalSignature empty;
    empty.events.push_back({Bol::stick, 0, 0});
    EXPECT_THROW(recognize_sollukattu(empty, dict()), NoRecognizedBols);

    std::istringstream twins("A | 6 | [ta] [ta] [ta] [ta] [ta] [ta]\nB | 6 | [ta] [ta] [ta] [ta] [ta] [_]\n");
    const auto d = parse_dictionary(twins);
    const std::vector<Bol> g = {Bol::ta, Bol::ta};
    const auto r = recognize_sollukattu(g, d);
    EXPECT_EQ(r.name, "A");
    EXPECT_EQ(r.ties, (std::vector<std::string>{"A", "B"}));
}
