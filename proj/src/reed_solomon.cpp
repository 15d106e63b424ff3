#include "pairsonic/reed_solomon.hpp"

#include <array>
#include <string>
#include <vector>

#include "pairsonic/error.hpp"

namespace pairsonic::modem {

namespace {

struct Tables {
  std::array<std::uint8_t, 512> exp{};
  std::array<int, 256> log{};
  Tables() {
    int x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[i] = static_cast<std::uint8_t>(x);
      log[x] = i;
      x <<= 1;
      if (x & 0x100) x ^= 0x11D;
    }
    for (int i = 255; i < 512; ++i) exp[i] = exp[i - 255];
    log[0] = -1;
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

using Poly = std::vector<std::uint8_t>;  // index 0 = highest degree

void check_params(std::size_t length, std::size_t parity_count) {
  if (parity_count < 2 || parity_count > 32 || parity_count % 2 != 0) {
    throw Error(ErrorCode::kInvalidConfig, "parity count must be even and in [2, 32]");
  }
  if (length > 255) throw Error(ErrorCode::kInvalidConfig, "codeword longer than 255 bytes");
}

// Generator polynomial prod_{i<parity} (x - alpha^i), highest degree first.
Poly generator(std::size_t parity_count) {
  Poly g{1};
  for (std::size_t i = 0; i < parity_count; ++i) {
    Poly next(g.size() + 1, 0);
    std::uint8_t root = gf256::pow2(static_cast<int>(i));
    for (std::size_t j = 0; j < g.size(); ++j) {
      next[j] ^= g[j];
      next[j + 1] ^= gf256::mul(g[j], root);
    }
    g = std::move(next);
  }
  return g;
}

// Lowest-degree-first polynomial evaluation.
std::uint8_t eval_low_first(const std::vector<std::uint8_t>& p, std::uint8_t x) {
  std::uint8_t y = 0;
  for (std::size_t i = p.size(); i-- > 0;) y = static_cast<std::uint8_t>(gf256::mul(y, x) ^ p[i]);
  return y;
}

std::vector<std::uint8_t> syndromes(ByteView codeword, std::size_t parity_count) {
  std::vector<std::uint8_t> s(parity_count, 0);
  for (std::size_t j = 0; j < parity_count; ++j) {
    std::uint8_t x = gf256::pow2(static_cast<int>(j));
    std::uint8_t y = 0;
    for (std::uint8_t c : codeword) y = static_cast<std::uint8_t>(gf256::mul(y, x) ^ c);
    s[j] = y;
  }
  return s;
}

[[noreturn]] void uncorrectable(const std::string& why) { throw Error(ErrorCode::kUncorrectableError, why); }

}  // namespace

namespace gf256 {

std::uint8_t mul(std::uint8_t a, std::uint8_t b) {
  if (a == 0 || b == 0) return 0;
  const auto& t = tables();
  return t.exp[t.log[a] + t.log[b]];
}

std::uint8_t div(std::uint8_t a, std::uint8_t b) {
  if (b == 0) throw Error(ErrorCode::kInvalidConfig, "GF(256) division by zero");
  if (a == 0) return 0;
  const auto& t = tables();
  return t.exp[(t.log[a] + 255 - t.log[b]) % 255];
}

std::uint8_t pow2(int exponent) {
  int e = exponent % 255;
  if (e < 0) e += 255;
  return tables().exp[e];
}

}  // namespace gf256

Bytes rs_encode(ByteView data, std::size_t parity_count) {
  check_params(data.size() + parity_count, parity_count);
  Poly g = generator(parity_count);
  // Remainder of data(x) * x^parity divided by g(x), via an LFSR.
  Bytes parity(parity_count, 0);
  for (std::uint8_t d : data) {
    std::uint8_t feedback = d ^ parity[0];
    for (std::size_t j = 0; j + 1 < parity_count; ++j) {
      parity[j] = parity[j + 1] ^ gf256::mul(feedback, g[j + 1]);
    }
    parity[parity_count - 1] = gf256::mul(feedback, g[parity_count]);
  }
  return parity;
}

RsDecoded rs_decode(ByteView codeword, std::size_t parity_count) {
  check_params(codeword.size(), parity_count);
  if (codeword.size() <= parity_count) uncorrectable("codeword has no data bytes");
  const std::size_t n = codeword.size();
  auto s = syndromes(codeword, parity_count);

  RsDecoded result;
  result.data.assign(codeword.begin(), codeword.end() - static_cast<std::ptrdiff_t>(parity_count));
  bool clean = true;
  for (auto v : s) clean = clean && v == 0;
  if (clean) return result;

  // Berlekamp-Massey: error locator Lambda(x), lowest degree first.
  std::vector<std::uint8_t> lambda{1};
  std::vector<std::uint8_t> prev{1};
  std::size_t errors = 0;
  std::size_t shift = 1;
  std::uint8_t prev_discrepancy = 1;
  for (std::size_t k = 0; k < parity_count; ++k) {
    std::uint8_t delta = s[k];
    for (std::size_t i = 1; i <= errors && i < lambda.size(); ++i) {
      delta ^= gf256::mul(lambda[i], s[k - i]);
    }
    if (delta == 0) {
      ++shift;
      continue;
    }
    std::uint8_t scale = gf256::div(delta, prev_discrepancy);
    std::vector<std::uint8_t> updated = lambda;
    if (updated.size() < prev.size() + shift) updated.resize(prev.size() + shift, 0);
    for (std::size_t i = 0; i < prev.size(); ++i) updated[i + shift] ^= gf256::mul(scale, prev[i]);
    if (2 * errors <= k) {
      prev = lambda;
      errors = k + 1 - errors;
      prev_discrepancy = delta;
      shift = 1;
    } else {
      ++shift;
    }
    lambda = std::move(updated);
  }
  while (lambda.size() > 1 && lambda.back() == 0) lambda.pop_back();
  std::size_t degree = lambda.size() - 1;
  if (degree == 0 || degree > parity_count / 2 || degree != errors) {
    uncorrectable("error locator degree " + std::to_string(degree));
  }

  // Chien search over codeword positions: position p has locator
  // X = alpha^(n-1-p); it is in error iff Lambda(X^-1) == 0.
  std::vector<std::size_t> positions;
  for (std::size_t p = 0; p < n; ++p) {
    std::uint8_t x_inv = gf256::pow2(-static_cast<int>(n - 1 - p));
    if (eval_low_first(lambda, x_inv) == 0) positions.push_back(p);
  }
  if (positions.size() != degree) uncorrectable("locator roots do not match its degree");

  // Forney: Omega(x) = S(x) Lambda(x) mod x^parity; with first root alpha^0
  // the magnitude is X * Omega(X^-1) / Lambda'(X^-1).
  std::vector<std::uint8_t> omega(parity_count, 0);
  for (std::size_t i = 0; i < parity_count; ++i) {
    for (std::size_t j = 0; j < lambda.size() && i + j < parity_count; ++j) {
      omega[i + j] ^= gf256::mul(s[i], lambda[j]);
    }
  }
  std::vector<std::uint8_t> lambda_prime(lambda.size() > 1 ? lambda.size() - 1 : 1, 0);
  for (std::size_t i = 1; i < lambda.size(); i += 2) lambda_prime[i - 1] = lambda[i];

  Bytes corrected(codeword.begin(), codeword.end());
  for (std::size_t p : positions) {
    int power = static_cast<int>(n - 1 - p);
    std::uint8_t x = gf256::pow2(power);
    std::uint8_t x_inv = gf256::pow2(-power);
    std::uint8_t denom = eval_low_first(lambda_prime, x_inv);
    if (denom == 0) uncorrectable("zero derivative at error locator");
    std::uint8_t magnitude = gf256::mul(x, gf256::div(eval_low_first(omega, x_inv), denom));
    corrected[p] ^= magnitude;
  }
  for (auto v : syndromes(corrected, parity_count)) {
    if (v != 0) uncorrectable("residual syndrome after correction");
  }
  result.data.assign(corrected.begin(), corrected.end() - static_cast<std::ptrdiff_t>(parity_count));
  result.corrected = positions.size();
  return result;
}

}  // namespace pairsonic::modem
