#include "corticarve/error.hpp"

namespace corticarve {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::grid_mismatch: return "grid_mismatch";
    case Errc::degenerate_input: return "degenerate_input";
    case Errc::no_boundary: return "no_boundary";
    case Errc::non_finite: return "non_finite";
    case Errc::stale_cache: return "stale_cache";
    case Errc::io_failure: return "io_failure";
    case Errc::bad_magic: return "bad_magic";
    case Errc::unsupported_format: return "unsupported_format";
    case Errc::unsupported_datatype: return "unsupported_datatype";
    case Errc::truncated_payload: return "truncated_payload";
    case Errc::out_of_range_cast: return "out_of_range_cast";
    case Errc::config_parse: return "config_parse";
    case Errc::config_unknown_key: return "config_unknown_key";
    case Errc::config_inverted_range: return "config_inverted_range";
  }
  return "unknown";
}

}  // namespace corticarve
