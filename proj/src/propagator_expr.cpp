#include "rllc/propagator_expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace rllc {

namespace {

class Parser {
 public:
  // Owns a copy so strtod always sees a null-terminated buffer.
  explicit Parser(std::string_view text) : owned_(text), text_(owned_) {}

  Propagator parse() {
    Propagator result = term();
    skip_ws();
    while (!done()) {
      expect_plus();
      result = union_of(result, term());
      skip_ws();
    }
    return result;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw PropagatorParseError(message, pos_);
  }

  bool done() const { return pos_ >= text_.size(); }

  char peek() const { return done() ? '\0' : text_[pos_]; }

  void skip_ws() {
    while (!done() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect_plus() {
    // '+' per the grammar; the pretty-printed '⊕' (UTF-8 e2 8a 95) is
    // accepted too so labels round-trip.
    if (peek() == '+') {
      ++pos_;
      return;
    }
    if (text_.substr(pos_, 3) == "⊕") {
      pos_ += 3;
      return;
    }
    fail("expected '+'");
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  double number() {
    skip_ws();
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    if (!std::isfinite(value)) fail("number must be finite");
    pos_ += static_cast<std::size_t>(end - begin);
    return value;
  }

  int block_size() {
    skip_ws();
    const std::size_t at = pos_;
    const double value = number();
    const int m = static_cast<int>(value);
    if (value != m || m < 1) {
      pos_ = at;
      fail("block size must be a positive integer");
    }
    return m;
  }

  Propagator term() {
    skip_ws();
    if (done()) fail("expected a propagator term");
    std::string head;
    while (!done() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
      head += text_[pos_++];
    }
    if (head == "M") return args_momentum();
    if (head == "CM") return args_complex();
    if (head == "Mk") return args_jordan();
    if (head == "CMk") return args_complex_jordan();
    pos_ -= head.size();
    fail("expected one of M, CM, Mk, CMk");
  }

  Propagator args_momentum() {
    expect('(');
    const double beta = number();
    expect(')');
    return momentum(beta);
  }

  Propagator args_complex() {
    expect('(');
    const double re = number();
    expect(',');
    const double im = number();
    expect(')');
    return complex_momentum(re, im);
  }

  Propagator args_jordan() {
    expect('(');
    const int m = block_size();
    expect(',');
    const double beta = number();
    expect(')');
    return jordan_momentum(m, beta);
  }

  Propagator args_complex_jordan() {
    expect('(');
    const int m = block_size();
    expect(',');
    const double re = number();
    expect(',');
    const double im = number();
    expect(')');
    return complex_jordan_momentum(m, re, im);
  }

  std::string owned_;
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Propagator parse_propagator(std::string_view text) { return Parser(text).parse(); }

}  // namespace rllc
