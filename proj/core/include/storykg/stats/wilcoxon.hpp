#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "storykg/stats/ratings.hpp"

namespace storykg::stats {

enum class WilcoxonMethod { Exact, NormalApprox };
// Auto picks Exact for n_used <= kExactMaxN.
enum class MethodChoice { Auto, Exact, NormalApprox };

inline constexpr std::size_t kExactMaxN = 20;

std::string_view to_string(WilcoxonMethod m) noexcept;

struct WilcoxonResult {
  std::size_t n_used = 0;
  double w_plus = 0.0;
  double w_minus = 0.0;
  double w = 0.0;  // min(w_plus, w_minus)
  double p_two_sided = 1.0;
  WilcoxonMethod method = WilcoxonMethod::Exact;
};

// Signed ranks of the nonzero differences: |d| ranked ascending, ties get
// their average rank. Returned in input order with zeros removed.
std::vector<double> signed_ranks(std::span<const double> diffs);

// Zero differences are dropped. Two-sided p = P(min(W+, W-) <= w) under
// equiprobable sign flips over the observed rank multiset (exact), or the
// normal approximation with continuity and tie corrections.
// Throws AllZeroDifferences; an explicit Exact with n_used above 30 throws
// InvalidArgument.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs, MethodChoice method = MethodChoice::Auto);

// d_p = value(A) - value(B) for each pair under the measure.
std::vector<double> paired_differences(const PairedComparison& cmp, const Measure& measure);

// Throws EmptyGroup for a comparison without pairs.
WilcoxonResult compare_conditions(const PairedComparison& cmp, const Measure& measure,
                                  MethodChoice method = MethodChoice::Auto);

}  // namespace storykg::stats
