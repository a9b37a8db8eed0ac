#pragma once

// Inter-annotator agreement (Cohen's kappa) over overlapping annotation slices.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bucketbot/detail/util.hpp"
#include "bucketbot/sentiment_label.hpp"

namespace bucketbot {

struct AnnotationPair {
  std::string text;
  AnnotationLabel first;   // annotator A; nullopt = Skip
  AnnotationLabel second;  // annotator B
  std::string group;       // which annotator pair produced it (for pairwise aggregation)
};

using AnnotationOverlap = std::vector<AnnotationPair>;

enum class SkipMode {
  StrictSkips,  // a pair containing Skip is a disagreement; Skip is its own marginal category
  IgnoreSkips,  // pairs containing Skip are dropped first
};

namespace detail {

inline constexpr std::size_t kSkipIndex = kNumLabels;
inline constexpr std::size_t kNumAnnotationCategories = kNumLabels + 1;

inline std::size_t category_of(const AnnotationLabel& l) { return l ? index_of(*l) : kSkipIndex; }

}  // namespace detail

// Chance-corrected agreement (p_o - p_e) / (1 - p_e), with p_e from each
// annotator's marginal category frequencies. Computed on integer counts so
// that the degenerate p_e = 1 case is detected exactly.
inline double cohen_kappa(const AnnotationOverlap& overlap, SkipMode mode) {
  std::array<std::int64_t, detail::kNumAnnotationCategories> marg_a{}, marg_b{};
  std::int64_t n = 0, agree = 0;
  for (const auto& p : overlap) {
    const bool has_skip = !p.first || !p.second;
    if (has_skip && mode == SkipMode::IgnoreSkips) continue;
    ++n;
    ++marg_a[detail::category_of(p.first)];
    ++marg_b[detail::category_of(p.second)];
    if (!has_skip && *p.first == *p.second) ++agree;
  }
  if (n == 0) throw Error("no annotation pairs left to compare");
  std::int64_t chance = 0;  // n^2 * p_e
  for (std::size_t k = 0; k < detail::kNumAnnotationCategories; ++k) chance += marg_a[k] * marg_b[k];
  const std::int64_t n2 = n * n;
  if (chance == n2) {
    if (agree == n) return 1.0;
    throw Error("degenerate marginals: chance agreement is 1");
  }
  return static_cast<double>(n * agree - chance) / static_cast<double>(n2 - chance);
}

// Kappa of all pairs pooled into one contingency table.
inline double pooled_kappa(const AnnotationOverlap& overlap, SkipMode mode) {
  return cohen_kappa(overlap, mode);
}

// Mean of the per-group kappas (one group per annotator pair). Groups whose
// kappa is undefined are skipped; throws if none is defined.
inline double pairwise_mean_kappa(const AnnotationOverlap& overlap, SkipMode mode) {
  std::map<std::string, AnnotationOverlap> groups;
  for (const auto& p : overlap) groups[p.group].push_back(p);
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& [name, pairs] : groups) {
    try {
      sum += cohen_kappa(pairs, mode);
      ++defined;
    } catch (const Error&) {
    }
  }
  if (defined == 0) throw Error("kappa undefined for every annotator pair");
  return sum / static_cast<double>(defined);
}

// `text<TAB>label_a<TAB>label_b[<TAB>group]`, labels from -- - 0 + ++ skip.
inline AnnotationOverlap parse_overlap(std::string_view content) {
  AnnotationOverlap overlap;
  std::size_t line_no = 0;
  for (auto line : detail::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() < 3 || cols.size() > 4)
      throw Error("malformed overlap record at line " + std::to_string(line_no));
    AnnotationPair p;
    p.text = std::string(detail::trim(cols[0]));
    for (int c = 1; c <= 2; ++c) {
      const auto token = detail::trim(cols[c]);
      const auto parsed = annotation_from_token(token);
      if (!parsed)
        throw Error("unknown label '" + std::string(token) + "' at line " + std::to_string(line_no));
      (c == 1 ? p.first : p.second) = *parsed;
    }
    if (cols.size() == 4) p.group = std::string(detail::trim(cols[3]));
    overlap.push_back(std::move(p));
  }
  return overlap;
}

inline AnnotationOverlap load_overlap(const std::string& path) {
  return parse_overlap(detail::read_file(path));
}

}  // namespace bucketbot
