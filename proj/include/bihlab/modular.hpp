#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bihlab {

/// Incremental row echelon form over the prime field F_p with p = 2^61 - 1.
/// Integer vectors are inserted one at a time; insertion reports whether the vector was independent of
/// the ones already accepted. Ranks of integer matrices agree with their rational ranks unless p divides
/// one of the relevant minors, which the size of p makes practically impossible.
class ModEchelon {
 public:
  using SparseInt = std::vector<std::pair<int, std::int64_t>>;

  static constexpr std::uint64_t kP = (std::uint64_t{1} << 61) - 1;

  static std::uint64_t reduce(std::int64_t v) {
    const std::int64_t r = v % static_cast<std::int64_t>(kP);
    return static_cast<std::uint64_t>(r < 0 ? r + static_cast<std::int64_t>(kP) : r);
  }
  static std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    std::uint64_t lo = static_cast<std::uint64_t>(p & kP);
    std::uint64_t hi = static_cast<std::uint64_t>(p >> 61);
    std::uint64_t s = lo + hi;
    return s >= kP ? s - kP : s;
  }
  static std::uint64_t add(std::uint64_t a, std::uint64_t b) {
    const std::uint64_t s = a + b;
    return s >= kP ? s - kP : s;
  }
  static std::uint64_t inverse(std::uint64_t a) {
    std::uint64_t result = 1, base = a, e = kP - 2;
    while (e) {
      if (e & 1) result = mul(result, base);
      base = mul(base, base);
      e >>= 1;
    }
    return result;
  }

  /// Returns true and stores the reduced vector if it is independent of the accepted ones.
  bool insert(const SparseInt& v) {
    std::map<int, std::uint64_t> acc;
    for (const auto& [i, x] : v) {
      const std::uint64_t r = reduce(x);
      if (r == 0) continue;
      auto [it, fresh] = acc.emplace(i, r);
      if (!fresh) {
        it->second = add(it->second, r);
        if (it->second == 0) acc.erase(it);
      }
    }
    while (!acc.empty()) {
      const auto [lead, val] = *acc.begin();
      auto piv = pivots_.find(lead);
      if (piv == pivots_.end()) {
        const std::uint64_t inv = inverse(val);
        std::vector<std::pair<int, std::uint64_t>> row;
        row.reserve(acc.size());
        for (const auto& [i, x] : acc) row.emplace_back(i, mul(x, inv));
        pivots_.emplace(lead, std::move(row));
        return true;
      }
      const std::uint64_t f = kP - val;  // subtract val * pivot row (pivot entry is 1)
      for (const auto& [i, x] : piv->second) {
        auto [it, fresh] = acc.emplace(i, mul(f, x));
        if (!fresh) {
          it->second = add(it->second, mul(f, x));
          if (it->second == 0) acc.erase(it);
        }
      }
    }
    return false;
  }

  int rank() const { return static_cast<int>(pivots_.size()); }

 private:
  std::unordered_map<int, std::vector<std::pair<int, std::uint64_t>>> pivots_;
};

}  // namespace bihlab
