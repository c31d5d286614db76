#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace surrotune {

enum class ErrorKind {
  domain,           // argument outside its mathematical domain
  underdetermined,  // too few distinct configurations for a fit
  rank,             // rank-deficient design
  pole,             // rational denominator vanishes or changes sign
  format,           // malformed input file
  io,               // unreadable / unwritable path
  optimization,     // every start of the optimizer failed
  usage,            // bad command-line flags
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::underdetermined: return "underdetermined";
    case ErrorKind::rank: return "rank";
    case ErrorKind::pole: return "pole";
    case ErrorKind::format: return "format";
    case ErrorKind::io: return "io";
    case ErrorKind::optimization: return "optimization";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace surrotune
