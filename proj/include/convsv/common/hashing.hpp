#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

namespace convsv {

// Incremental SHA-256; `hex()` finalizes and may be called once.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  std::string hex();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

std::string sha256_hex(std::string_view bytes);

// FNV-1a 64 over raw bytes. Platform independent.
std::uint64_t fnv1a64(std::string_view bytes);

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Seed for an independent stream named by `tag`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

}  // namespace convsv
