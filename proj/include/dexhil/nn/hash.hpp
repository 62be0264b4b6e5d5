#pragma once

#include <string>
#include <string_view>

#include <Eigen/Core>

namespace dexhil::nn {

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Incremental SHA-256 over mixed content.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view bytes);
  void update(const double* values, std::size_t count);
  std::string hex_digest();

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace dexhil::nn
