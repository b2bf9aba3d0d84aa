#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace corticarve {

enum class Errc {
  invalid_argument,
  grid_mismatch,
  degenerate_input,
  no_boundary,
  non_finite,
  stale_cache,
  io_failure,
  bad_magic,
  unsupported_format,
  unsupported_datatype,
  truncated_payload,
  out_of_range_cast,
  config_parse,
  config_unknown_key,
  config_inverted_range,
};

std::string_view errc_name(Errc code) noexcept;

/// Library-wide exception. Every failure raised by corticarve carries a code
/// so that front ends can map categories to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace corticarve
