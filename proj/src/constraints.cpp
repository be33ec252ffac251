#include "lsdat/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lsdat/errors.hpp"

namespace lsdat {

NormKind norm_kind(const PerturbationConstraint& c) {
  if (std::holds_alternative<L0Budget>(c)) return NormKind::L0;
  if (std::holds_alternative<L2Budget>(c)) return NormKind::L2;
  return NormKind::Linf;
}

double budget_value(const PerturbationConstraint& c) {
  return std::visit(
      [](const auto& b) -> double {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, L0Budget>) {
          return static_cast<double>(b.k);
        } else if constexpr (std::is_same_v<T, L2Budget>) {
          return b.epsilon;
        } else {
          return b.sigma;
        }
      },
      c);
}

void validate(const PerturbationConstraint& c) {
  std::visit(
      [](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, L0Budget>) {
          if (b.k < 1) throw ConfigError("l0 budget requires k >= 1");
        } else if constexpr (std::is_same_v<T, L2Budget>) {
          if (!(b.epsilon > 0.0)) throw ConfigError("l2 budget requires epsilon > 0");
        } else {
          if (!(b.sigma > 0.0)) throw ConfigError("linf budget requires sigma > 0");
        }
      },
      c);
}

ImageTensor project_l0(const ImageTensor& delta, std::size_t k) {
  if (k >= delta.size()) return delta;
  std::vector<std::size_t> idx(delta.size());
  std::iota(idx.begin(), idx.end(), 0);
  // stable_sort keeps ascending index among equal magnitudes
  std::stable_sort(idx.begin(), idx.end(), [&delta](std::size_t a, std::size_t b) {
    return std::abs(delta.data[a]) > std::abs(delta.data[b]);
  });
  ImageTensor out(delta.height, delta.width, delta.channels);
  for (std::size_t i = 0; i < k; ++i) {
    out.data[idx[i]] = delta.data[idx[i]];
  }
  return out;
}

ImageTensor project_l2(const ImageTensor& delta, double epsilon) {
  const double norm = measure(delta, NormKind::L2);
  if (norm <= epsilon || norm == 0.0) return delta;
  ImageTensor out = (epsilon / norm) * delta;
  // Rounding can leave the result a few ulp outside the ball; nudge once.
  const double post = measure(out, NormKind::L2);
  if (post > epsilon) {
    out = ((epsilon / post) * (1.0 - 1e-14)) * out;
  }
  return out;
}

ImageTensor project_linf(const ImageTensor& delta, double sigma) {
  ImageTensor out = delta;
  for (double& v : out.data) v = std::clamp(v, -sigma, sigma);
  return out;
}

ImageTensor project(const ImageTensor& delta, const PerturbationConstraint& c) {
  return std::visit(
      [&delta](const auto& b) -> ImageTensor {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, L0Budget>) {
          return project_l0(delta, b.k);
        } else if constexpr (std::is_same_v<T, L2Budget>) {
          return project_l2(delta, b.epsilon);
        } else {
          return project_linf(delta, b.sigma);
        }
      },
      c);
}

double measure(const ImageTensor& delta, NormKind p, double support_eps) {
  switch (p) {
    case NormKind::L0: {
      std::size_t count = 0;
      for (double v : delta.data) {
        if (std::abs(v) > support_eps) ++count;
      }
      return static_cast<double>(count);
    }
    case NormKind::L2: {
      double sum = 0.0;
      for (double v : delta.data) sum += v * v;
      return std::sqrt(sum);
    }
    case NormKind::Linf: {
      double m = 0.0;
      for (double v : delta.data) m = std::max(m, std::abs(v));
      return m;
    }
  }
  return 0.0;
}

}  // namespace lsdat
