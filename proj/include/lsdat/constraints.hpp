#pragma once

#include <cstddef>
#include <variant>

#include "lsdat/image.hpp"

namespace lsdat {

/// Entries with absolute value at or below this count as zero when
/// measuring l0 norms and sparse supports.
inline constexpr double kDefaultSupportEps = 1e-6;

enum class NormKind { L0, L2, Linf };

struct L0Budget {
  std::size_t k = 1;  // number of coordinates allowed to change
};

struct L2Budget {
  double epsilon = 0.0;  // radius
};

struct LinfBudget {
  double sigma = 0.0;  // per-entry bound
};

/// Exactly one of the three imperceptibility budgets.
using PerturbationConstraint = std::variant<L0Budget, L2Budget, LinfBudget>;

NormKind norm_kind(const PerturbationConstraint& c);
double budget_value(const PerturbationConstraint& c);

/// Throws ConfigError when the budget is non-positive.
void validate(const PerturbationConstraint& c);

/// Keeps the k coordinates of largest absolute value (ties broken by
/// ascending index), zeros the rest. k >= size is the identity.
ImageTensor project_l0(const ImageTensor& delta, std::size_t k);

/// Radial scaling onto the epsilon ball; inputs already inside are
/// returned unchanged.
ImageTensor project_l2(const ImageTensor& delta, double epsilon);

/// Entrywise clamp to [-sigma, sigma].
ImageTensor project_linf(const ImageTensor& delta, double sigma);

ImageTensor project(const ImageTensor& delta, const PerturbationConstraint& c);

/// l0 count (|entry| > support_eps), l2 norm, or max |entry|.
double measure(const ImageTensor& delta, NormKind p, double support_eps = kDefaultSupportEps);

}  // namespace lsdat
