#include "pilotwave/spin_expr.hpp"

#include <cctype>
#include <cmath>
#include <charconv>
#include <variant>

namespace pilotwave {

std::string ParseError::caret(std::string_view source) const {
  std::string out(source);
  out += '\n';
  out += std::string(std::min(column_, source.size()), ' ');
  out += '^';
  return out;
}

namespace {

using Value = std::variant<Complex, InternalState>;

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  InternalState parse() {
    skip_ws();
    if (at_end()) throw ParseError(pos_, "empty expression");
    Value v = expr();
    skip_ws();
    if (!at_end()) throw ParseError(pos_, "unexpected character '" + std::string(1, text_[pos_]) + "'");
    if (std::holds_alternative<Complex>(v)) throw ParseError(0, "expression has no spin labels");
    return std::get<InternalState>(std::move(v));
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  void expect(char c) {
    skip_ws();
    if (peek() != c) throw ParseError(pos_, std::string("expected '") + c + "'");
    ++pos_;
  }

  Value expr() {
    skip_ws();
    bool negate = false;
    if (peek() == '+' || peek() == '-') {
      negate = peek() == '-';
      ++pos_;
    }
    Value acc = term();
    if (negate) acc = scale(acc, -1.0);
    for (;;) {
      skip_ws();
      if (peek() != '+' && peek() != '-') return acc;
      const std::size_t op_pos = pos_;
      const bool minus = peek() == '-';
      ++pos_;
      Value rhs = term();
      acc = add(acc, minus ? scale(rhs, -1.0) : rhs, op_pos);
    }
  }

  Value term() {
    Value acc = factor();
    for (;;) {
      skip_ws();
      const char c = peek();
      const std::size_t op_pos = pos_;
      if (c == '*') {
        ++pos_;
        acc = multiply(acc, factor(), op_pos);
      } else if (c == '/') {
        ++pos_;
        skip_ws();
        const std::size_t rhs_pos = pos_;
        Value rhs = factor();
        if (!std::holds_alternative<Complex>(rhs)) throw ParseError(rhs_pos, "can only divide by a scalar");
        acc = scale(acc, 1.0 / std::get<Complex>(rhs));
      } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '(' || c == '.') {
        acc = multiply(acc, factor(), op_pos);
      } else {
        return acc;
      }
    }
  }

  Value factor() {
    skip_ws();
    const std::size_t start = pos_;
    const char c = peek();
    if (c == '(') {
      ++pos_;
      Value v = expr();
      expect(')');
      return v;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Complex{number()};
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::string ident;
      while (!at_end() && std::isalpha(static_cast<unsigned char>(peek()))) ident += text_[pos_++];
      if ((ident == "a" || ident == "b") && std::isdigit(static_cast<unsigned char>(peek()))) {
        const int slot = integer();
        if (slot < 1) throw ParseError(start, "slots are 1-based");
        return InternalState::basis({{slot, ident == "a" ? SpinLabel::A : SpinLabel::B}});
      }
      if (ident == "sqrt") {
        expect('(');
        Value v = expr();
        expect(')');
        if (!std::holds_alternative<Complex>(v)) throw ParseError(start, "sqrt of a state");
        return std::sqrt(std::get<Complex>(v));
      }
      for (BellKind kind : kBellKinds) {
        if (ident != to_string(kind)) continue;
        expect('(');
        skip_ws();
        const std::size_t i_pos = pos_;
        const int i = integer();
        expect(',');
        skip_ws();
        const int j = integer();
        expect(')');
        try {
          return bell_state(kind, i, j, std::max(i, j));
        } catch (const Error& e) {
          throw ParseError(i_pos, e.what());
        }
      }
      throw ParseError(start, "unknown name '" + ident + "'");
    }
    if (at_end()) throw ParseError(pos_, "unexpected end of expression");
    throw ParseError(pos_, "unexpected character '" + std::string(1, c) + "'");
  }

  double number() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.' ||
                         peek() == 'e' || peek() == 'E' ||
                         ((peek() == '-' || peek() == '+') && pos_ > start &&
                          (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E')))) {
      ++pos_;
    }
    double v = 0;
    const auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_) throw ParseError(start, "malformed number");
    return v;
  }

  int integer() {
    const std::size_t start = pos_;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || start == pos_) throw ParseError(start, "expected an integer");
    return v;
  }

  static Value scale(const Value& v, Complex c) {
    if (const auto* s = std::get_if<Complex>(&v)) return *s * c;
    return c * std::get<InternalState>(v);
  }

  static Value add(const Value& x, const Value& y, std::size_t where) {
    if (x.index() != y.index()) throw ParseError(where, "cannot add a scalar and a state");
    if (const auto* s = std::get_if<Complex>(&x)) return *s + std::get<Complex>(y);
    try {
      return std::get<InternalState>(x) + std::get<InternalState>(y);
    } catch (const Error&) {
      throw ParseError(where, "terms of a sum must cover the same slots");
    }
  }

  static Value multiply(const Value& x, const Value& y, std::size_t where) {
    if (const auto* s = std::get_if<Complex>(&x)) return scale(y, *s);
    if (const auto* s = std::get_if<Complex>(&y)) return scale(x, *s);
    try {
      return tensor(std::get<InternalState>(x), std::get<InternalState>(y));
    } catch (const Error&) {
      throw ParseError(where, "tensor factors share a slot");
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

InternalState parse_state(std::string_view text) { return Parser(text).parse(); }

}  // namespace pilotwave
