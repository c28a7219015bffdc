#pragma once

#include <stdexcept>
#include <string>

namespace reid {

enum class Errc {
  zero_vector,
  dim_mismatch,
  index_out_of_range,
  empty_cluster,
  no_clusters,
  empty_gallery,
  parse_error,
  invalid_config,
  io_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::zero_vector: return "ZeroVector";
    case Errc::dim_mismatch: return "DimMismatch";
    case Errc::index_out_of_range: return "IndexOutOfRange";
    case Errc::empty_cluster: return "EmptyCluster";
    case Errc::no_clusters: return "NoClusters";
    case Errc::empty_gallery: return "EmptyGallery";
    case Errc::parse_error: return "ParseError";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::io_error: return "IOError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  // Input-side failures map to exit code 2 in the CLI; everything else is 1.
  bool is_user_error() const noexcept {
    return code_ == Errc::parse_error || code_ == Errc::invalid_config ||
           code_ == Errc::dim_mismatch || code_ == Errc::io_error;
  }

 private:
  Errc code_;
};

}  // namespace reid
