#pragma once

// Modular exponentiation backend for large groups. Variable-base powers go
// through OpenSSL's constant-time Montgomery ladder; powers of the fixed
// generator use a precomputed window table.

#include <gmpxx.h>
#include <memory>

namespace medledger::pre::detail {

class ModExp {
 public:
  ModExp(const mpz_class& p, const mpz_class& g, std::size_t exponent_bits);
  ~ModExp();
  ModExp(const ModExp&) = delete;
  ModExp& operator=(const ModExp&) = delete;

  mpz_class pow(const mpz_class& base, const mpz_class& exponent) const;
  mpz_class pow_g(const mpz_class& exponent) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace medledger::pre::detail
