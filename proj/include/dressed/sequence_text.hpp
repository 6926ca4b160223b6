#pragma once

// Line-oriented text form of PulseSequence.
//
//   # comment
//   name <identifier>
//   param <key> <value>
//   prep <A|B> <|0>|+1>|-1>|B>|D>>
//   rot <A|B> <x+|y+|x-|y-|z|dq|xB> <angle rad>
//   dephase <A|B> <m1> <m2>
//   wait <us>
//   segment <us>
//     drive <A|B> <plus|minus> <rabi MHz> [det <MHz>] [phase <rad>]
//   end
//   read <A|B> <P0|P+1|P-1|PB|PD>
//
// Angles may be written as plain numbers or as multiples of pi ("pi/2",
// "-pi", "3pi/2").

#include "dressed/sequence.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace dressed {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                           message),
        line_(line),
        column_(column),
        message_(message) {}

  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& message() const { return message_; }

 private:
  int line_;
  int column_;
  std::string message_;
};

namespace text_detail {

struct Token {
  std::string_view text;
  int column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long> parse_int(std::string_view s) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// k*pi/n with the same floating-point evaluation used when rendering.
inline double pi_multiple(long k, long n) { return static_cast<double>(k) * std::numbers::pi / static_cast<double>(n); }

inline std::optional<double> parse_angle(std::string_view s) {
  if (auto v = parse_number(s)) return v;
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  const auto pi_pos = s.find("pi");
  if (pi_pos == std::string_view::npos) return std::nullopt;
  long k = 1;
  if (pi_pos > 0) {
    auto coeff = parse_int(s.substr(0, pi_pos));
    if (!coeff || *coeff <= 0) return std::nullopt;
    k = *coeff;
  }
  long n = 1;
  auto rest = s.substr(pi_pos + 2);
  if (!rest.empty()) {
    if (rest.front() != '/') return std::nullopt;
    auto denom = parse_int(rest.substr(1));
    if (!denom || *denom <= 0) return std::nullopt;
    n = *denom;
  }
  return pi_multiple(negative ? -k : k, n);
}

inline std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string format_angle(double v) {
  for (long n : {1L, 2L, 4L}) {
    for (long k = -4; k <= 4; ++k) {
      if (k == 0) continue;
      if (pi_multiple(k, n) == v) {
        std::string s = k < 0 ? "-" : "";
        if (std::abs(k) != 1) s += std::to_string(std::abs(k));
        s += "pi";
        if (n != 1) s += "/" + std::to_string(n);
        return s;
      }
    }
  }
  return format_number(v);
}

inline const char* prep_token(PrepState s) {
  switch (s) {
    case PrepState::zero: return "|0>";
    case PrepState::plus1: return "|+1>";
    case PrepState::minus1: return "|-1>";
    case PrepState::bright: return "|B>";
    case PrepState::dark: return "|D>";
  }
  return "?";
}

inline const char* axis_token(Axis a) {
  switch (a) {
    case Axis::x_plus: return "x+";
    case Axis::y_plus: return "y+";
    case Axis::x_minus: return "x-";
    case Axis::y_minus: return "y-";
    case Axis::z: return "z";
    case Axis::dq: return "dq";
    case Axis::x_bright: return "xB";
  }
  return "?";
}

inline const char* readout_token(ReadoutKind k) {
  switch (k) {
    case ReadoutKind::P0: return "P0";
    case ReadoutKind::Pplus1: return "P+1";
    case ReadoutKind::Pminus1: return "P-1";
    case ReadoutKind::PB: return "PB";
    case ReadoutKind::PD: return "PD";
  }
  return "?";
}

inline const char* level_token(Level m) {
  switch (m) {
    case Level::plus: return "+1";
    case Level::zero: return "0";
    case Level::minus: return "-1";
  }
  return "?";
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  PulseSequence run() {
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      const auto nl = text_.find('\n', pos);
      auto line = text_.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_no_;
      handle_line(tokenize(line));
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
    }
    if (open_segment_) fail(open_segment_line_, 1, "segment is not closed with 'end'");
    if (!has_readout_) fail(line_no_, 1, "no readout");
    return std::move(seq_);
  }

 private:
  [[noreturn]] void fail(int line, int column, const std::string& msg) const { throw ParseError(line, column, msg); }
  [[noreturn]] void fail(const Token& t, const std::string& msg) const { fail(line_no_, t.column, msg); }

  void expect_count(const std::vector<Token>& t, std::size_t min, std::size_t max) const {
    if (t.size() < min) {
      fail(line_no_, t.back().column + static_cast<int>(t.back().text.size()),
           "'" + std::string(t[0].text) + "' expects more arguments");
    }
    if (t.size() > max) fail(t[max], "unexpected token '" + std::string(t[max].text) + "'");
  }

  Spin spin(const Token& t) const {
    if (t.text == "A") return Spin::A;
    if (t.text == "B") return Spin::B;
    fail(t, "unknown spin '" + std::string(t.text) + "'");
  }

  double number(const Token& t) const {
    if (auto v = parse_number(t.text)) return *v;
    fail(t, "expected a number, got '" + std::string(t.text) + "'");
  }

  double angle(const Token& t) const {
    if (auto v = parse_angle(t.text)) return *v;
    fail(t, "expected an angle, got '" + std::string(t.text) + "'");
  }

  double duration(const Token& t) const {
    const double d = number(t);
    if (d < 0.0) fail(t, "negative duration");
    return d;
  }

  Level level(const Token& t) const {
    if (t.text == "0") return Level::zero;
    if (t.text == "+1" || t.text == "1") return Level::plus;
    if (t.text == "-1") return Level::minus;
    fail(t, "unknown spin level '" + std::string(t.text) + "'");
  }

  void handle_line(const std::vector<Token>& t) {
    if (t.empty()) return;
    const auto kw = t[0].text;
    if (has_readout_) fail(t[0], "instruction after readout");

    if (open_segment_) {
      if (kw == "drive") return handle_drive(t);
      if (kw == "end") {
        expect_count(t, 1, 1);
        seq_.instructions.push_back(std::move(segment_));
        segment_ = {};
        open_segment_ = false;
        return;
      }
      fail(t[0], "'" + std::string(kw) + "' is not allowed inside a segment");
    }

    if (kw == "name") {
      expect_count(t, 2, 2);
      seq_.name = std::string(t[1].text);
    } else if (kw == "param") {
      expect_count(t, 3, 3);
      seq_.bindings.emplace_back(std::string(t[1].text), number(t[2]));
    } else if (kw == "prep") {
      expect_count(t, 3, 3);
      const Spin s = spin(t[1]);
      static constexpr PrepState states[] = {PrepState::zero, PrepState::plus1, PrepState::minus1,
                                             PrepState::bright, PrepState::dark};
      for (auto st : states) {
        if (t[2].text == prep_token(st)) {
          seq_.instructions.push_back(Prep{s, st});
          return;
        }
      }
      fail(t[2], "unknown prep state '" + std::string(t[2].text) + "'");
    } else if (kw == "rot") {
      expect_count(t, 4, 4);
      const Spin s = spin(t[1]);
      static constexpr Axis axes[] = {Axis::x_plus, Axis::y_plus, Axis::x_minus, Axis::y_minus,
                                      Axis::z,      Axis::dq,     Axis::x_bright};
      for (auto a : axes) {
        if (t[2].text == axis_token(a)) {
          seq_.instructions.push_back(Rotate{s, a, angle(t[3])});
          return;
        }
      }
      fail(t[2], "unknown rotation axis '" + std::string(t[2].text) + "'");
    } else if (kw == "dephase") {
      expect_count(t, 4, 4);
      const Spin s = spin(t[1]);
      const Level a = level(t[2]);
      const Level b = level(t[3]);
      if (a == b) fail(t[3], "dephase needs two distinct levels");
      seq_.instructions.push_back(Dephase{s, a, b});
    } else if (kw == "wait") {
      expect_count(t, 2, 2);
      seq_.instructions.push_back(Segment{duration(t[1]), {}});
    } else if (kw == "segment") {
      expect_count(t, 2, 2);
      segment_ = Segment{duration(t[1]), {}};
      open_segment_ = true;
      open_segment_line_ = line_no_;
    } else if (kw == "read") {
      expect_count(t, 3, 3);
      const Spin s = spin(t[1]);
      static constexpr ReadoutKind kinds[] = {ReadoutKind::P0, ReadoutKind::Pplus1, ReadoutKind::Pminus1,
                                              ReadoutKind::PB, ReadoutKind::PD};
      for (auto k : kinds) {
        if (t[2].text == readout_token(k)) {
          seq_.instructions.push_back(Readout{s, k});
          has_readout_ = true;
          return;
        }
      }
      fail(t[2], "unknown readout projector '" + std::string(t[2].text) + "'");
    } else if (kw == "drive") {
      fail(t[0], "'drive' outside a segment");
    } else if (kw == "end") {
      fail(t[0], "'end' without an open segment");
    } else {
      fail(t[0], "unknown instruction '" + std::string(kw) + "'");
    }
  }

  void handle_drive(const std::vector<Token>& t) {
    expect_count(t, 4, 8);
    DriveSpec d;
    d.spin = spin(t[1]);
    if (t[2].text == "plus") {
      d.transition = Transition::plus;
    } else if (t[2].text == "minus") {
      d.transition = Transition::minus;
    } else {
      fail(t[2], "unknown transition '" + std::string(t[2].text) + "'");
    }
    d.rabi = number(t[3]);
    if (d.rabi < 0.0) fail(t[3], "negative rabi frequency");
    std::size_t i = 4;
    while (i < t.size()) {
      if (i + 1 >= t.size()) fail(t[i], "option '" + std::string(t[i].text) + "' needs a value");
      if (t[i].text == "det") {
        d.detuning = number(t[i + 1]);
      } else if (t[i].text == "phase") {
        d.phase = angle(t[i + 1]);
      } else {
        fail(t[i], "unknown drive option '" + std::string(t[i].text) + "'");
      }
      i += 2;
    }
    segment_.drives.push_back(d);
  }

  std::string_view text_;
  int line_no_ = 0;
  PulseSequence seq_;
  Segment segment_;
  bool open_segment_ = false;
  int open_segment_line_ = 0;
  bool has_readout_ = false;
};

}  // namespace text_detail

/// Parses the text form; throws ParseError with line/column on failure.
inline PulseSequence parse_sequence(std::string_view text) { return text_detail::Parser(text).run(); }

/// Renders a sequence so that parse_sequence(render_sequence(s)) == s.
inline std::string render_sequence(const PulseSequence& seq) {
  using namespace text_detail;
  std::ostringstream out;
  if (!seq.name.empty()) out << "name " << seq.name << '\n';
  for (const auto& [key, value] : seq.bindings) out << "param " << key << ' ' << format_number(value) << '\n';
  for (const auto& ins : seq.instructions) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, Prep>) {
            out << "prep " << spin_name(x.spin) << ' ' << prep_token(x.state) << '\n';
          } else if constexpr (std::is_same_v<T, Rotate>) {
            out << "rot " << spin_name(x.spin) << ' ' << axis_token(x.axis) << ' ' << format_angle(x.angle) << '\n';
          } else if constexpr (std::is_same_v<T, Dephase>) {
            out << "dephase " << spin_name(x.spin) << ' ' << level_token(x.first) << ' ' << level_token(x.second)
                << '\n';
          } else if constexpr (std::is_same_v<T, Segment>) {
            if (x.drives.empty()) {
              out << "wait " << format_number(x.duration) << '\n';
            } else {
              out << "segment " << format_number(x.duration) << '\n';
              for (const auto& d : x.drives) {
                out << "  drive " << spin_name(d.spin) << ' '
                    << (d.transition == Transition::plus ? "plus" : "minus") << ' ' << format_number(d.rabi);
                if (d.detuning != 0.0) out << " det " << format_number(d.detuning);
                if (d.phase != 0.0) out << " phase " << format_angle(d.phase);
                out << '\n';
              }
              out << "end\n";
            }
          } else if constexpr (std::is_same_v<T, Readout>) {
            out << "read " << spin_name(x.spin) << ' ' << readout_token(x.kind) << '\n';
          }
        },
        ins);
  }
  return out.str();
}

}  // namespace dressed
