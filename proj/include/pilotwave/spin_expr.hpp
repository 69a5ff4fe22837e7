#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "pilotwave/error.hpp"
#include "pilotwave/spin.hpp"

namespace pilotwave {

/// Parse failure with a 0-based column into the source text.
class ParseError : public Error {
 public:
  ParseError(std::size_t column, const std::string& message)
      : Error(ErrorKind::Parse, message + " at column " + std::to_string(column + 1)),
        column_(column),
        detail_(message) {}

  std::size_t column() const noexcept { return column_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Source line followed by a caret line pointing at the column.
  std::string caret(std::string_view source) const;

 private:
  std::size_t column_;
  std::string detail_;
};

/// Parses a state expression in label notation. Accepted forms:
///   alpha(1,2)*alpha(3,4)      Bell states, '*' or juxtaposition is a tensor product
///   a1 b2 - b1 a2              basis kets
///   0.5(a1 b2 + b1 a2)         scalars, sqrt(x), '/' by a scalar
InternalState parse_state(std::string_view text);

}  // namespace pilotwave
