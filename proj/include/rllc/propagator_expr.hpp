#pragma once

#include "rllc/propagator.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rllc {

struct PropagatorParseError : std::runtime_error {
  PropagatorParseError(const std::string& message, std::size_t position)
      : std::runtime_error(message + " at position " + std::to_string(position)),
        position(position) {}
  std::size_t position;
};

/// Parses a propagator expression. Grammar:
///   expr  := term (('+' | '⊕') term)*
///   term  := M(beta) | CM(re,im) | Mk(m,beta) | CMk(m,re,im)
/// Whitespace is ignored everywhere. Numbers use C double syntax.
/// Examples: "M(0.9)+M(0.0)", "Mk(2,0.6)", "M(0.9)+CM(0,0.9)".
Propagator parse_propagator(std::string_view text);

}  // namespace rllc
