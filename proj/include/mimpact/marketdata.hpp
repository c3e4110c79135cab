#pragma once

// Trade-level input: LOBSTER ingestion, cleaning (same-timestamp merge,
// session clipping), price-change conventions and a synthetic LMF order-flow
// generator.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mimpact/detail/random.hpp"
#include "mimpact/detail/text.hpp"
#include "mimpact/error.hpp"

namespace mimpact {

/// One executed trade. Prices are integers in 10^-4 currency units.
struct TradeTick {
  std::int64_t timestamp_ns = 0;  // since midnight of the session day
  std::int64_t trade_price = 0;
  std::int64_t size = 0;  // shares, > 0
  int direction = 0;      // +1 buyer-initiated, -1 seller-initiated
  std::int64_t mid_before = 0;
  std::int64_t mid_after = 0;

  double signed_volume() const { return static_cast<double>(direction) * static_cast<double>(size); }
  friend bool operator==(const TradeTick&, const TradeTick&) = default;
};

struct SessionBounds {
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
  std::int64_t length_ns() const { return end_ns - start_ns; }
  friend bool operator==(const SessionBounds&, const SessionBounds&) = default;
};

/// Counters collected while cleaning; nothing here is fatal.
struct IngestDiagnostics {
  std::size_t execution_rows = 0;
  std::size_t rejected_missing_quote = 0;
  std::size_t dropped_outside_session = 0;
  std::size_t filtered_out = 0;  // hidden executions / odd lots when filtered
  bool empty_window = false;     // set by clip_session when nothing survives
};

struct EventSeries {
  std::vector<TradeTick> ticks;
  SessionBounds session;
  std::string asset_id;
  IngestDiagnostics diagnostics;

  std::size_t size() const { return ticks.size(); }
  bool empty() const { return ticks.empty(); }
};

enum class PriceConvention { PostTrade, PreTrade };

/// Aligned pairs (dp_t, v_t). dp is in 10^-4 price units, v in signed shares.
struct RegressionDataset {
  std::vector<double> dp;
  std::vector<double> v;
  PriceConvention convention = PriceConvention::PostTrade;

  std::size_t size() const { return dp.size(); }
};

struct LmfFlowParams {
  std::size_t n_metaorders = 1;
  double size_tail_exponent = 1.5;  // survival P(L >= l) = l^-a
  std::size_t horizon = 1;
  std::int64_t child_size = 1;
  std::uint64_t seed = 0;
  std::size_t max_length = 0;  // 0 = no cap; 1 forces single-trade metaorders

  void validate() const {
    if (n_metaorders == 0) throw InvalidArgument("lmf: n_metaorders must be positive");
    if (!(size_tail_exponent > 1.0)) throw InvalidArgument("lmf: size_tail_exponent must exceed 1");
    if (horizon == 0) throw InvalidArgument("lmf: horizon must be positive");
    if (child_size <= 0) throw InvalidArgument("lmf: child_size must be positive");
  }
};

// ---------------------------------------------------------------------------
// LOBSTER ingestion
// ---------------------------------------------------------------------------

enum class TradeFormat { LobsterMessages };

/// How the message-file direction column maps to the trade sign.
/// LOBSTER records the side of the *resting* limit order, so an executed sell
/// limit order (-1) is a buyer-initiated trade.
enum class ExecutionSign { LimitOrderSide, AsRecorded };

struct LobsterOptions {
  SessionBounds session{34'200'000'000'000LL, 57'600'000'000'000LL};  // 09:30-16:00
  bool include_hidden = true;
  bool drop_odd_lots = false;  // drops executions smaller than 100 shares
  ExecutionSign sign = ExecutionSign::LimitOrderSide;
  std::string asset_id;
};

namespace detail {

inline constexpr std::int64_t kLobsterDummyAsk = 9'999'999'999LL;

/// LOBSTER prices are integers in 10^-4 dollars; a decimal point means the
/// value is in currency units and is rescaled.
inline std::optional<std::int64_t> parse_lobster_price(std::string_view s) {
  s = trim(s);
  if (s.find('.') != std::string_view::npos) return parse_fixed_point(s, 4);
  return parse_int(s);
}

/// (bid + ask) / 2 in integer units, ties rounded to even.
inline std::int64_t integer_mid(std::int64_t bid, std::int64_t ask) {
  const std::int64_t sum = bid + ask;
  std::int64_t half = sum / 2;
  if (sum % 2 != 0) {
    if (sum < 0) --half;  // floor
    if (half % 2 != 0) ++half;
  }
  return half;
}

struct QuoteState {
  bool valid = false;
  std::int64_t mid = 0;
};

inline QuoteState parse_quote_row(std::string_view line, std::size_t line_no) {
  const auto cols = split(line, ',');
  if (cols.size() < 4 || cols.size() % 4 != 0)
    throw ParseError(line_no, "orderbook row must have a multiple of 4 columns, got " +
                                  std::to_string(cols.size()));
  const auto ask = parse_lobster_price(cols[0]);
  const auto bid = parse_lobster_price(cols[2]);
  if (!ask || !bid) throw ParseError(line_no, "orderbook row has a non-numeric best price");
  QuoteState q;
  if (*ask >= kLobsterDummyAsk || *bid <= -kLobsterDummyAsk || *bid <= 0 || *ask <= *bid)
    return q;  // empty side or crossed book
  q.valid = true;
  q.mid = integer_mid(*bid, *ask);
  return q;
}

}  // namespace detail

/// Reads a LOBSTER message stream and its companion level-1+ orderbook stream
/// (row i of the orderbook is the book after message i). Only executions
/// (types 4 and 5) become ticks; mid_before comes from the book row preceding
/// the execution and mid_after from the book row of the execution itself.
inline EventSeries parse_trade_file(std::istream& messages, std::istream& orderbook,
                                    TradeFormat format = TradeFormat::LobsterMessages,
                                    const LobsterOptions& options = {}) {
  if (format != TradeFormat::LobsterMessages) throw InvalidArgument("unsupported trade format");

  EventSeries out;
  out.session = options.session;
  out.asset_id = options.asset_id;

  std::string msg_line;
  std::string book_line;
  std::size_t line_no = 0;
  detail::QuoteState previous;
  std::int64_t last_ts = std::numeric_limits<std::int64_t>::min();
  bool book_exhausted = false;

  while (std::getline(messages, msg_line)) {
    ++line_no;
    detail::QuoteState current;
    if (!book_exhausted && std::getline(orderbook, book_line)) {
      if (!detail::trim(book_line).empty()) current = detail::parse_quote_row(book_line, line_no);
    } else {
      book_exhausted = true;
    }

    const auto trimmed = detail::trim(msg_line);
    if (trimmed.empty()) {
      previous = current;
      continue;
    }
    const auto cols = detail::split(trimmed, ',');
    if (cols.size() != 6)
      throw ParseError(line_no, "message row must have 6 columns, got " + std::to_string(cols.size()));

    const auto ts = detail::parse_fixed_point(cols[0], 9);
    const auto type = detail::parse_int(cols[1]);
    const auto order_id = detail::parse_int(cols[2]);
    const auto size = detail::parse_int(cols[3]);
    const auto price = detail::parse_lobster_price(cols[4]);
    const auto dir = detail::parse_int(cols[5]);
    if (!ts || *ts < 0) throw ParseError(line_no, "bad timestamp '" + std::string(cols[0]) + "'");
    if (!type || !order_id || !size || !price || !dir)
      throw ParseError(line_no, "non-numeric field in message row");
    if (*dir != 1 && *dir != -1) throw ParseError(line_no, "direction must be 1 or -1");
    if (*ts < last_ts) throw OrderingError(line_no, "timestamp decreases");
    last_ts = *ts;

    const bool is_execution = *type == 4 || *type == 5;
    if (is_execution) {
      ++out.diagnostics.execution_rows;
      if (*size <= 0) throw ParseError(line_no, "execution size must be positive");
      if (*ts < options.session.start_ns || *ts > options.session.end_ns) {
        ++out.diagnostics.dropped_outside_session;
      } else if ((*type == 5 && !options.include_hidden) || (options.drop_odd_lots && *size < 100)) {
        ++out.diagnostics.filtered_out;
      } else if (!previous.valid || !current.valid) {
        ++out.diagnostics.rejected_missing_quote;
      } else {
        TradeTick tick;
        tick.timestamp_ns = *ts;
        tick.trade_price = *price;
        tick.size = *size;
        tick.direction = options.sign == ExecutionSign::LimitOrderSide ? -static_cast<int>(*dir)
                                                                         : static_cast<int>(*dir);
        tick.mid_before = previous.mid;
        tick.mid_after = current.mid;
        out.ticks.push_back(tick);
      }
    }
    previous = current;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

/// Collapses runs of consecutive ticks sharing timestamp and sign. The merged
/// tick keeps the first constituent's mid_before and the last one's
/// mid_after and trade price.
inline EventSeries merge_same_timestamp(const EventSeries& series) {
  EventSeries out;
  out.session = series.session;
  out.asset_id = series.asset_id;
  out.diagnostics = series.diagnostics;
  out.ticks.reserve(series.ticks.size());
  for (const auto& tick : series.ticks) {
    if (!out.ticks.empty()) {
      auto& last = out.ticks.back();
      if (last.timestamp_ns == tick.timestamp_ns && last.direction == tick.direction) {
        last.size += tick.size;
        last.mid_after = tick.mid_after;
        last.trade_price = tick.trade_price;
        continue;
      }
    }
    out.ticks.push_back(tick);
  }
  return out;
}

/// Keeps ticks inside [start + head, end - tail] and narrows the session.
inline EventSeries clip_session(const EventSeries& series,
                                std::chrono::nanoseconds head = std::chrono::minutes(30),
                                std::chrono::nanoseconds tail = std::chrono::minutes(30)) {
  if (head.count() < 0 || tail.count() < 0) throw InvalidArgument("clip_session: negative duration");
  if (head.count() + tail.count() >= series.session.length_ns() &&
      !(head.count() == 0 && tail.count() == 0))
    throw InvalidArgument("clip_session: head + tail must be shorter than the session");

  EventSeries out;
  out.asset_id = series.asset_id;
  out.diagnostics = series.diagnostics;
  out.session = {series.session.start_ns + head.count(), series.session.end_ns - tail.count()};
  std::copy_if(series.ticks.begin(), series.ticks.end(), std::back_inserter(out.ticks),
               [&](const TradeTick& t) {
                 return t.timestamp_ns >= out.session.start_ns && t.timestamp_ns <= out.session.end_ns;
               });
  out.diagnostics.empty_window = out.ticks.empty();
  return out;
}

/// Builds the (dp, v) regression pairs.
///   PostTrade: dp_t = mid_after(t) - mid_after(t-1), paired with v_t, t >= 1.
///   PreTrade:  dp_t = mid_before(t+1) - mid_before(t), paired with v_t, t <= n-2.
inline RegressionDataset price_changes(const EventSeries& series, PriceConvention convention) {
  const auto& ticks = series.ticks;
  if (ticks.size() < 2) throw InsufficientData("price_changes: need at least 2 ticks");
  RegressionDataset out;
  out.convention = convention;
  out.dp.reserve(ticks.size() - 1);
  out.v.reserve(ticks.size() - 1);
  for (std::size_t t = 1; t < ticks.size(); ++t) {
    if (convention == PriceConvention::PostTrade) {
      out.dp.push_back(static_cast<double>(ticks[t].mid_after - ticks[t - 1].mid_after));
      out.v.push_back(ticks[t].signed_volume());
    } else {
      out.dp.push_back(static_cast<double>(ticks[t].mid_before - ticks[t - 1].mid_before));
      out.v.push_back(ticks[t - 1].signed_volume());
    }
  }
  return out;
}

inline std::vector<double> signed_volumes(const EventSeries& series) {
  std::vector<double> v;
  v.reserve(series.ticks.size());
  for (const auto& t : series.ticks) v.push_back(t.signed_volume());
  return v;
}

// ---------------------------------------------------------------------------
// Synthetic order flow
// ---------------------------------------------------------------------------

namespace detail {

/// Discrete Pareto length with P(L >= l) = l^-a, by inverse transform.
inline std::size_t draw_metaorder_length(Engine& rng, double a, std::size_t cap) {
  const double u = uniform_open_closed(rng);
  const double l = std::floor(std::pow(u, -1.0 / a));
  constexpr double kMax = 9.0e15;
  std::size_t len = l >= kMax ? static_cast<std::size_t>(kMax) : static_cast<std::size_t>(l);
  if (cap != 0) len = std::min(len, cap);
  return std::max<std::size_t>(len, 1);
}

inline int draw_sign(Engine& rng) { return (rng() >> 63) != 0 ? 1 : -1; }

}  // namespace detail

/// Order flow made of M concurrently executing metaorders with i.i.d. signs
/// and power-law lengths. At each step one active metaorder (uniform) emits a
/// child trade; exhausted metaorders are replaced by fresh draws. Timestamps
/// are the step index in nanoseconds and the midprice is held constant.
inline EventSeries synth_lmf_orderflow(const LmfFlowParams& params) {
  params.validate();
  auto rng = detail::make_engine(params.seed);
  std::vector<std::size_t> remaining(params.n_metaorders);
  std::vector<int> sign(params.n_metaorders);
  for (std::size_t j = 0; j < params.n_metaorders; ++j) {
    remaining[j] = detail::draw_metaorder_length(rng, params.size_tail_exponent, params.max_length);
    sign[j] = detail::draw_sign(rng);
  }
  std::uniform_int_distribution<std::size_t> pick(0, params.n_metaorders - 1);

  constexpr std::int64_t kMid = 1'000'000;  // 100.0000
  EventSeries out;
  out.asset_id = "synthetic-lmf";
  out.session = {0, static_cast<std::int64_t>(params.horizon)};
  out.ticks.reserve(params.horizon);
  for (std::size_t t = 0; t < params.horizon; ++t) {
    const std::size_t j = pick(rng);
    out.ticks.push_back({static_cast<std::int64_t>(t), kMid, params.child_size, sign[j], kMid, kMid});
    if (--remaining[j] == 0) {
      remaining[j] = detail::draw_metaorder_length(rng, params.size_tail_exponent, params.max_length);
      sign[j] = detail::draw_sign(rng);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline void write_event_csv(std::ostream& os, const EventSeries& series) {
  os << "timestamp_ns,direction,size,mid_before,mid_after\n";
  for (const auto& t : series.ticks)
    os << t.timestamp_ns << ',' << t.direction << ',' << t.size << ',' << t.mid_before << ','
       << t.mid_after << '\n';
}

inline EventSeries read_event_csv(std::istream& is) {
  EventSeries out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line_no == 1 || detail::trim(line).empty()) continue;
    const auto cols = detail::split(line, ',');
    if (cols.size() != 5) throw ParseError(line_no, "event row must have 5 columns");
    TradeTick t;
    const auto ts = detail::parse_int(cols[0]);
    const auto dir = detail::parse_int(cols[1]);
    const auto size = detail::parse_int(cols[2]);
    const auto mb = detail::parse_int(cols[3]);
    const auto ma = detail::parse_int(cols[4]);
    if (!ts || !dir || !size || !mb || !ma) throw ParseError(line_no, "non-numeric event field");
    if ((*dir != 1 && *dir != -1) || *size <= 0) throw ParseError(line_no, "invalid direction or size");
    if (!out.ticks.empty() && *ts < out.ticks.back().timestamp_ns)
      throw OrderingError(line_no, "timestamp decreases");
    t = {*ts, 0, *size, static_cast<int>(*dir), *mb, *ma};
    out.ticks.push_back(t);
  }
  if (!out.ticks.empty()) out.session = {out.ticks.front().timestamp_ns, out.ticks.back().timestamp_ns};
  return out;
}

inline void write_dataset_csv(std::ostream& os, const RegressionDataset& ds) {
  os << "dp,v\n";
  for (std::size_t i = 0; i < ds.size(); ++i)
    os << detail::format_double(ds.dp[i]) << ',' << detail::format_double(ds.v[i]) << '\n';
}

inline RegressionDataset read_dataset_csv(std::istream& is) {
  RegressionDataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line_no == 1 || detail::trim(line).empty()) continue;
    const auto cols = detail::split(line, ',');
    if (cols.size() != 2) throw ParseError(line_no, "dataset row must have 2 columns");
    const auto dp = detail::parse_double(cols[0]);
    const auto v = detail::parse_double(cols[1]);
    if (!dp || !v) throw ParseError(line_no, "non-numeric dataset field");
    out.dp.push_back(*dp);
    out.v.push_back(*v);
  }
  return out;
}

}  // namespace mimpact
