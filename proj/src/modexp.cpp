#include "modexp.hpp"

#include <openssl/bn.h>

#include <mutex>
#include <stdexcept>
#include <vector>

namespace medledger::pre::detail {

namespace {

constexpr unsigned kWindowBits = 6;
constexpr unsigned kWindowSize = 1u << kWindowBits;

struct BnDeleter {
  void operator()(BIGNUM* b) const { BN_clear_free(b); }
};
struct BnCtxDeleter {
  void operator()(BN_CTX* c) const { BN_CTX_free(c); }
};
struct MontDeleter {
  void operator()(BN_MONT_CTX* m) const { BN_MONT_CTX_free(m); }
};

using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxDeleter>;

BnPtr make_bn() {
  BnPtr b(BN_new());
  if (!b) throw std::bad_alloc();
  return b;
}

BnPtr to_bn(const mpz_class& v) {
  std::size_t len = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  std::vector<unsigned char> buf(len == 0 ? 1 : len);
  std::size_t count = 0;
  mpz_export(buf.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
  BnPtr b(BN_bin2bn(buf.data(), static_cast<int>(count), nullptr));
  if (!b) throw std::bad_alloc();
  return b;
}

mpz_class from_bn(const BIGNUM* b) {
  std::vector<unsigned char> buf(static_cast<std::size_t>(BN_num_bytes(b)) + 1);
  int len = BN_bn2bin(b, buf.data());
  mpz_class v;
  if (len > 0) mpz_import(v.get_mpz_t(), static_cast<std::size_t>(len), 1, 1, 1, 0, buf.data());
  return v;
}

BnCtxPtr make_ctx() {
  BnCtxPtr c(BN_CTX_new());
  if (!c) throw std::bad_alloc();
  return c;
}

}  // namespace

struct ModExp::Impl {
  BnPtr p;
  BnPtr g;
  std::unique_ptr<BN_MONT_CTX, MontDeleter> mont;
  std::size_t exponent_bits;

  mutable std::once_flag table_once;
  // table[i][d] = g^(d * 2^(w*i)) in Montgomery form, d in [0, 2^w).
  mutable std::vector<std::vector<BnPtr>> table;

  void build_table() const {
    auto ctx = make_ctx();
    const std::size_t windows = (exponent_bits + kWindowBits - 1) / kWindowBits;
    table.resize(windows);
    auto base = make_bn();  // g^(2^(w*i)) in Montgomery form
    if (!BN_to_montgomery(base.get(), g.get(), mont.get(), ctx.get())) throw std::runtime_error("bn");
    for (std::size_t i = 0; i < windows; ++i) {
      auto& row = table[i];
      row.reserve(kWindowSize);
      auto one = make_bn();
      if (!BN_to_montgomery(one.get(), BN_value_one(), mont.get(), ctx.get()))
        throw std::runtime_error("bn");
      row.push_back(std::move(one));
      for (unsigned d = 1; d < kWindowSize; ++d) {
        auto next = make_bn();
        if (!BN_mod_mul_montgomery(next.get(), row.back().get(), base.get(), mont.get(), ctx.get()))
          throw std::runtime_error("bn");
        row.push_back(std::move(next));
      }
      // Advance base to base^(2^w).
      auto next_base = make_bn();
      if (!BN_mod_mul_montgomery(next_base.get(), row.back().get(), base.get(), mont.get(),
                                 ctx.get()))
        throw std::runtime_error("bn");
      base = std::move(next_base);
    }
  }
};

ModExp::ModExp(const mpz_class& p, const mpz_class& g, std::size_t exponent_bits)
    : impl_(std::make_unique<Impl>()) {
  impl_->p = to_bn(p);
  impl_->g = to_bn(g);
  impl_->exponent_bits = exponent_bits;
  impl_->mont.reset(BN_MONT_CTX_new());
  auto ctx = make_ctx();
  if (!impl_->mont || !BN_MONT_CTX_set(impl_->mont.get(), impl_->p.get(), ctx.get()))
    throw std::runtime_error("bn: montgomery setup");
}

ModExp::~ModExp() = default;

mpz_class ModExp::pow(const mpz_class& base, const mpz_class& exponent) const {
  auto ctx = make_ctx();
  auto b = to_bn(base);
  auto e = to_bn(exponent);
  BN_set_flags(e.get(), BN_FLG_CONSTTIME);
  auto r = make_bn();
  if (!BN_mod_exp_mont_consttime(r.get(), b.get(), e.get(), impl_->p.get(), ctx.get(),
                                 impl_->mont.get()))
    throw std::runtime_error("bn: mod_exp");
  return from_bn(r.get());
}

mpz_class ModExp::pow_g(const mpz_class& exponent) const {
  if (mpz_sizeinbase(exponent.get_mpz_t(), 2) > impl_->exponent_bits) return pow(from_bn(impl_->g.get()), exponent);
  std::call_once(impl_->table_once, [this] { impl_->build_table(); });
  auto ctx = make_ctx();
  auto acc = make_bn();
  if (!BN_copy(acc.get(), impl_->table[0][0].get())) throw std::runtime_error("bn");
  const auto& table = impl_->table;
  for (std::size_t i = 0; i < table.size(); ++i) {
    unsigned digit = 0;
    for (unsigned b = 0; b < kWindowBits; ++b) {
      if (mpz_tstbit(exponent.get_mpz_t(), i * kWindowBits + b)) digit |= 1u << b;
    }
    if (digit == 0) continue;
    if (!BN_mod_mul_montgomery(acc.get(), acc.get(), table[i][digit].get(), impl_->mont.get(),
                               ctx.get()))
      throw std::runtime_error("bn");
  }
  auto out = make_bn();
  if (!BN_from_montgomery(out.get(), acc.get(), impl_->mont.get(), ctx.get()))
    throw std::runtime_error("bn");
  return from_bn(out.get());
}

}  // namespace medledger::pre::detail
