#include "storykg/stats/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "storykg/error.hpp"

namespace storykg::stats {

namespace {

constexpr std::size_t kExactHardLimit = 30;

// Exact null distribution of 2*W+ (ranks doubled so averaged ties stay
// integral): counts[t] = number of sign assignments with 2*W+ == t.
std::vector<double> doubled_rank_sum_counts(const std::vector<std::int64_t>& doubled) {
  std::int64_t total = std::accumulate(doubled.begin(), doubled.end(), std::int64_t{0});
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  std::int64_t reach = 0;
  for (auto r : doubled) {
    for (std::int64_t t = reach; t >= 0; --t) {
      if (counts[t] != 0.0) counts[t + r] += counts[t];
    }
    reach += r;
  }
  return counts;
}

double exact_p(const std::vector<double>& abs_ranks, double w) {
  std::vector<std::int64_t> doubled;
  doubled.reserve(abs_ranks.size());
  for (double r : abs_ranks) doubled.push_back(std::llround(2.0 * r));
  auto counts = doubled_rank_sum_counts(doubled);
  const auto total = static_cast<std::int64_t>(counts.size()) - 1;
  const auto w2 = std::llround(2.0 * w);
  double hits = 0.0;
  for (std::int64_t t = 0; t <= total; ++t) {
    if (t <= w2 || total - t <= w2) hits += counts[t];
  }
  double p = hits / std::ldexp(1.0, static_cast<int>(abs_ranks.size()));
  return std::min(1.0, p);
}

double normal_p(std::size_t n, double w, const std::vector<double>& abs_values) {
  const double nd = static_cast<double>(n);
  const double mu = nd * (nd + 1.0) / 4.0;
  double tie_term = 0.0;
  std::vector<double> sorted = abs_values;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) return 1.0;
  double z = std::max(0.0, std::abs(w - mu) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

}  // namespace

std::string_view to_string(WilcoxonMethod m) noexcept {
  return m == WilcoxonMethod::Exact ? "exact" : "normal_approx";
}

std::vector<double> signed_ranks(std::span<const double> diffs) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] != 0.0) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });
  std::vector<double> rank_of(diffs.size(), 0.0);
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank_of[order[k]] = avg;
    i = j;
  }
  std::vector<double> out;
  out.reserve(order.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] != 0.0) out.push_back(diffs[i] > 0.0 ? rank_of[i] : -rank_of[i]);
  }
  return out;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs, MethodChoice method) {
  for (double d : diffs) {
    if (!std::isfinite(d)) throw Error(ErrorCode::InvalidArgument, "non-finite difference");
  }
  auto ranks = signed_ranks(diffs);
  if (ranks.empty()) throw Error(ErrorCode::AllZeroDifferences, "every paired difference is zero");

  WilcoxonResult res;
  res.n_used = ranks.size();
  std::vector<double> abs_ranks;
  abs_ranks.reserve(ranks.size());
  for (double r : ranks) {
    (r > 0.0 ? res.w_plus : res.w_minus) += std::abs(r);
    abs_ranks.push_back(std::abs(r));
  }
  res.w = std::min(res.w_plus, res.w_minus);

  bool exact = method == MethodChoice::Exact || (method == MethodChoice::Auto && res.n_used <= kExactMaxN);
  if (exact && res.n_used > kExactHardLimit) {
    throw Error(ErrorCode::InvalidArgument, "exact distribution limited to " + std::to_string(kExactHardLimit) +
                                                " nonzero differences");
  }
  if (exact) {
    res.method = WilcoxonMethod::Exact;
    res.p_two_sided = exact_p(abs_ranks, res.w);
  } else {
    std::vector<double> abs_values;
    for (double d : diffs) {
      if (d != 0.0) abs_values.push_back(std::abs(d));
    }
    res.method = WilcoxonMethod::NormalApprox;
    res.p_two_sided = normal_p(res.n_used, res.w, abs_values);
  }
  return res;
}

std::vector<double> paired_differences(const PairedComparison& cmp, const Measure& measure) {
  std::vector<double> d;
  d.reserve(cmp.pairs.size());
  for (const auto& p : cmp.pairs) d.push_back(measure_value(p.a, measure) - measure_value(p.b, measure));
  return d;
}

WilcoxonResult compare_conditions(const PairedComparison& cmp, const Measure& measure, MethodChoice method) {
  if (cmp.pairs.empty()) {
    throw Error(ErrorCode::EmptyGroup,
                "no participant rated both '" + cmp.condition_a + "' and '" + cmp.condition_b + "'");
  }
  auto d = paired_differences(cmp, measure);
  return wilcoxon_signed_rank(d, method);
}

}  // namespace storykg::stats
