#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mimpact/diffusivity.hpp"
#include "mimpact/marketdata.hpp"

using namespace mimpact;
using namespace std::chrono_literals;

namespace {

constexpr std::int64_t kOpen = 34'200'000'000'000LL;

EventSeries parse(const std::string& msgs, const std::string& book, LobsterOptions opts = {}) {
  std::istringstream m(msgs), b(book);
  return parse_trade_file(m, b, TradeFormat::LobsterMessages, opts);
}

LobsterOptions as_recorded() {
  LobsterOptions o;
  o.sign = ExecutionSign::AsRecorded;
  return o;
}

// Submission, execution, submission; the execution sits between two book states.
const std::string kMessages =
    "34200.000000001,1,11,50,3349000,1\n"
    "34200.500000000,4,12,100,3350000,1\n"
    "34201.250000000,1,13,20,3351000,-1\n";
const std::string kBook =
    "3350000,100,3349000,250\n"
    "3351000,300,3349000,250\n"
    "3351000,300,3350000,20\n";

TradeTick tick(std::int64_t ts, int dir, std::int64_t size, std::int64_t mb = 100, std::int64_t ma = 100) {
  return {ts, 0, size, dir, mb, ma};
}

EventSeries series_of(std::vector<TradeTick> ticks, SessionBounds s = {0, 1000}) {
  EventSeries e;
  e.ticks = std::move(ticks);
  e.session = s;
  return e;
}

EventSeries random_series(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> step(0, 2), dir(0, 1), size(1, 500), mid(990, 1010);
  std::vector<TradeTick> ticks;
  std::int64_t ts = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ts += step(rng);
    ticks.push_back(tick(ts, dir(rng) ? 1 : -1, size(rng), mid(rng), mid(rng)));
  }
  return series_of(std::move(ticks), {0, ts + 1});
}

}  // namespace

TEST(ParseTradeFile, EmptyStreamGivesEmptySeries) {
  const auto s = parse("", "");
  EXPECT_EQ(s.size(), 0u);
  EXPECT_EQ(s.diagnostics.execution_rows, 0u);
}

TEST(ParseTradeFile, SingleExecutionWithSurroundingQuotes) {
  const auto s = parse(kMessages, kBook, as_recorded());
  ASSERT_EQ(s.size(), 1u);
  const auto& t = s.ticks[0];
  EXPECT_EQ(t.direction, +1);
  EXPECT_EQ(t.size, 100);
  EXPECT_EQ(t.trade_price, 3350000);
  EXPECT_EQ(t.timestamp_ns, 34'200'500'000'000LL);
  EXPECT_EQ(t.mid_before, (3350000 + 3349000) / 2);
  EXPECT_EQ(t.mid_after, (3351000 + 3349000) / 2);
}

TEST(ParseTradeFile, DefaultSignFlipsRestingOrderSide) {
  // Execution of a resting buy limit order (+1) is a seller-initiated trade.
  const auto s = parse(kMessages, kBook);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.ticks[0].direction, -1);
}

TEST(ParseTradeFile, DecimalPricesAreRescaled) {
  const auto s = parse("34200.5,4,1,100,335.0000,1\n", "335.01,1,334.99,1\n", as_recorded());
  // No book row precedes the first message.
  EXPECT_EQ(s.size(), 0u);
  EXPECT_EQ(s.diagnostics.rejected_missing_quote, 1u);
  const auto s2 = parse("34200.1,1,1,5,335.0,1\n34200.5,4,1,100,335.0000,1\n",
                        "335.01,1,334.99,1\n335.02,1,334.99,1\n", as_recorded());
  ASSERT_EQ(s2.size(), 1u);
  EXPECT_EQ(s2.ticks[0].trade_price, 3350000);
  EXPECT_EQ(s2.ticks[0].mid_before, 3350000);
  EXPECT_EQ(s2.ticks[0].mid_after, 3350050);  // 335.005 exactly representable in 1e-4 units
}

TEST(ParseTradeFile, HalfUnitMidRoundsToEven) {
  EXPECT_EQ(detail::integer_mid(3349000, 3350001), 3349500);
  EXPECT_EQ(detail::integer_mid(3349001, 3350002), 3349502);
  EXPECT_EQ(detail::integer_mid(3, 4), 4);
  EXPECT_EQ(detail::integer_mid(1, 2), 2);
}

TEST(ParseTradeFile, MalformedRowReportsLineNumber) {
  try {
    parse("34200.1,1,1,5,3350000,1\n34200.2,4,1,abc,3350000,1\n", kBook);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("34200.1,1,1,5\n", kBook), ParseError);
  EXPECT_THROW(parse("34200.1,1,1,5,3350000,0\n", kBook), ParseError);
}

TEST(ParseTradeFile, DecreasingTimestampIsOrderingError) {
  try {
    parse("34200.2,1,1,5,3350000,1\n34200.1,1,2,5,3350000,1\n", kBook);
    FAIL() << "expected OrderingError";
  } catch (const OrderingError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ParseTradeFile, DummyQuoteRejectsTickAndCounts) {
  const std::string book =
      "9999999999,0,3349000,250\n"
      "3351000,300,3349000,250\n";
  const auto s = parse("34200.1,1,1,5,3350000,1\n34200.2,4,2,10,3350000,1\n", book);
  EXPECT_EQ(s.size(), 0u);
  EXPECT_EQ(s.diagnostics.rejected_missing_quote, 1u);
}

TEST(ParseTradeFile, SameTimestampRowsAreNotMerged) {
  const std::string msgs =
      "34200.1,1,1,5,3350000,1\n"
      "34200.2,4,2,10,3350000,1\n"
      "34200.2,4,3,20,3350000,1\n";
  const std::string book = kBook;
  const auto s = parse(msgs, book);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.ticks[0].timestamp_ns, s.ticks[1].timestamp_ns);
}

TEST(ParseTradeFile, FiltersAndSessionBounds) {
  const std::string msgs =
      "34200.1,1,1,5,3350000,1\n"
      "34200.2,5,0,10,3350000,1\n"
      "34200.3,4,3,20,3350000,1\n";
  LobsterOptions o;
  o.include_hidden = false;
  o.drop_odd_lots = true;
  const auto s = parse(msgs, kBook, o);
  EXPECT_EQ(s.size(), 0u);
  EXPECT_EQ(s.diagnostics.filtered_out, 2u);

  LobsterOptions late;
  late.session = {kOpen + 1'000'000'000LL, kOpen + 2'000'000'000LL};
  const auto s2 = parse(msgs, kBook, late);
  EXPECT_EQ(s2.size(), 0u);
  EXPECT_EQ(s2.diagnostics.dropped_outside_session, 2u);
}

TEST(MergeSameTimestamp, SameSignCollapses) {
  const auto m = merge_same_timestamp(series_of({tick(5, 1, 7, 100, 101), tick(5, 1, 3, 101, 103)}));
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.ticks[0].timestamp_ns, 5);
  EXPECT_EQ(m.ticks[0].size, 10);
  EXPECT_EQ(m.ticks[0].mid_before, 100);
  EXPECT_EQ(m.ticks[0].mid_after, 103);
}

TEST(MergeSameTimestamp, OppositeSignsOrDistinctTimesRetained) {
  EXPECT_EQ(merge_same_timestamp(series_of({tick(5, 1, 7), tick(5, -1, 3)})).size(), 2u);
  EXPECT_EQ(merge_same_timestamp(series_of({tick(5, 1, 7), tick(6, 1, 3)})).size(), 2u);
  EXPECT_EQ(merge_same_timestamp(EventSeries{}).size(), 0u);
}

TEST(MergeSameTimestamp, IdempotentOnRandomSeries) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = random_series(rng, 200);
    const auto once = merge_same_timestamp(s);
    const auto twice = merge_same_timestamp(once);
    EXPECT_EQ(once.ticks, twice.ticks);
    for (std::size_t i = 1; i < once.size(); ++i) {
      EXPECT_LE(once.ticks[i - 1].timestamp_ns, once.ticks[i].timestamp_ns);
      if (once.ticks[i - 1].timestamp_ns == once.ticks[i].timestamp_ns) {
        EXPECT_NE(once.ticks[i - 1].direction, once.ticks[i].direction);
      }
    }
  }
}

TEST(ClipSession, DefaultsKeepCentralWindow) {
  const std::int64_t start = kOpen, end = kOpen + 23'400'000'000'000LL;  // 6.5 h
  std::vector<TradeTick> ticks;
  for (std::int64_t m = 0; m <= 390; m += 5) ticks.push_back(tick(start + m * 60'000'000'000LL, 1, 1));
  const auto c = clip_session(series_of(ticks, {start, end}));
  EXPECT_EQ(c.session.start_ns, start + 1'800'000'000'000LL);
  EXPECT_EQ(c.session.end_ns, end - 1'800'000'000'000LL);
  for (const auto& t : c.ticks) {
    EXPECT_GE(t.timestamp_ns, c.session.start_ns);
    EXPECT_LE(t.timestamp_ns, c.session.end_ns);
  }
  EXPECT_EQ(c.size(), 67u);  // minutes 30, 35, ..., 360
  EXPECT_FALSE(c.diagnostics.empty_window);
}

TEST(ClipSession, ZeroDurationsAreIdentity) {
  std::mt19937_64 rng(3);
  const auto s = random_series(rng, 100);
  const auto c = clip_session(s, 0ns, 0ns);
  EXPECT_EQ(c.ticks, s.ticks);
  EXPECT_EQ(c.session, s.session);
}

TEST(ClipSession, EverythingInHeadGivesFlaggedEmptySeries) {
  const auto s = series_of({tick(10, 1, 1), tick(20, 1, 1)}, {0, 1000});
  const auto c = clip_session(s, 100ns, 100ns);
  EXPECT_TRUE(c.empty());
  EXPECT_TRUE(c.diagnostics.empty_window);
  EXPECT_THROW(clip_session(s, 600ns, 400ns), InvalidArgument);
}

TEST(ClipSession, CommutesWithMerge) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = random_series(rng, 300);
    const auto head = std::chrono::nanoseconds(s.session.length_ns() / 5);
    const auto tail = std::chrono::nanoseconds(s.session.length_ns() / 7);
    const auto a = clip_session(merge_same_timestamp(s), head, tail);
    const auto b = merge_same_timestamp(clip_session(s, head, tail));
    EXPECT_EQ(a.ticks, b.ticks);
  }
}

TEST(PriceChanges, PostTradeAndPreTradeExamples) {
  const auto s = series_of({tick(1, -1, 4, 99, 100), tick(2, 1, 7, 101, 102)});
  const auto post = price_changes(s, PriceConvention::PostTrade);
  ASSERT_EQ(post.size(), 1u);
  EXPECT_EQ(post.dp[0], 2.0);
  EXPECT_EQ(post.v[0], 7.0);
  const auto pre = price_changes(s, PriceConvention::PreTrade);
  ASSERT_EQ(pre.size(), 1u);
  EXPECT_EQ(pre.dp[0], 2.0);
  EXPECT_EQ(pre.v[0], -4.0);
}

TEST(PriceChanges, ConstantMidGivesZeroChanges) {
  std::mt19937_64 rng(9);
  auto s = random_series(rng, 100);
  for (auto& t : s.ticks) t.mid_after = t.mid_before = 1000;
  for (auto conv : {PriceConvention::PostTrade, PriceConvention::PreTrade})
    for (double x : price_changes(s, conv).dp) EXPECT_EQ(x, 0.0);
}

TEST(PriceChanges, TooFewTicks) {
  EXPECT_THROW(price_changes(series_of({tick(1, 1, 1)}), PriceConvention::PostTrade), InsufficientData);
}

TEST(SynthLmf, Deterministic) {
  LmfFlowParams p{20, 1.5, 10'000, 100, 42};
  const auto a = synth_lmf_orderflow(p), b = synth_lmf_orderflow(p);
  EXPECT_EQ(a.ticks, b.ticks);
  p.seed = 43;
  EXPECT_NE(synth_lmf_orderflow(p).ticks, a.ticks);
}

TEST(SynthLmf, UnitLengthsGiveIidSigns) {
  LmfFlowParams p{1, 1.5, 100'000, 1, 7, 1};
  const auto s = synth_lmf_orderflow(p);
  const auto r = acf(signed_volumes(s), 10);
  EXPECT_LT(std::abs(r[1]), 3.0 / std::sqrt(100'000.0));
}

TEST(SynthLmf, SignAcfDecaysWithTailExponentMinusOne) {
  LmfFlowParams p{20, 1.5, 1'000'000, 1, 2024};
  const auto r = acf(signed_volumes(synth_lmf_orderflow(p)), 1000);
  const auto fit = long_memory_exponent(r, 10, 1000);
  EXPECT_NEAR(-fit.gamma_hat, -0.5, 0.15);
}

TEST(SynthLmf, SignImbalanceVanishes) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    LmfFlowParams p{50, 2.5, 200'000, 1, seed};
    const auto s = synth_lmf_orderflow(p);
    double sv = 0, uv = 0;
    for (const auto& t : s.ticks) {
      sv += t.signed_volume();
      uv += static_cast<double>(t.size);
    }
    EXPECT_LT(std::abs(sv / uv), 5.0 / std::sqrt(200'000.0)) << "seed " << seed;
  }
}

TEST(SynthLmf, RejectsBadParameters) {
  EXPECT_THROW(synth_lmf_orderflow({0, 1.5, 10, 1, 0}), InvalidArgument);
  EXPECT_THROW(synth_lmf_orderflow({1, 1.0, 10, 1, 0}), InvalidArgument);
  EXPECT_THROW(synth_lmf_orderflow({1, 1.5, 0, 1, 0}), InvalidArgument);
}

TEST(EventCsv, RoundTrip) {
  std::mt19937_64 rng(1);
  const auto s = random_series(rng, 50);
  std::stringstream ss;
  write_event_csv(ss, s);
  EXPECT_EQ(ss.str().rfind("timestamp_ns,direction,size,mid_before,mid_after\n", 0), 0u);
  const auto back = read_event_csv(ss);
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back.ticks[i].timestamp_ns, s.ticks[i].timestamp_ns);
    EXPECT_EQ(back.ticks[i].direction, s.ticks[i].direction);
    EXPECT_EQ(back.ticks[i].size, s.ticks[i].size);
    EXPECT_EQ(back.ticks[i].mid_after, s.ticks[i].mid_after);
  }
}
