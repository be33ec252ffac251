#include "lsdat/attack.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "lsdat/errors.hpp"
#include "lsdat/log.hpp"

namespace lsdat {

void AttackParams::validate() const {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw ConfigError("alpha must lie in (0, 1]");
  }
  if (max_iter < 1) {
    throw ConfigError("max_iter must be at least 1");
  }
  lsdat::validate(constraint);
}

bool operator==(const PerturbationNorms& a, const PerturbationNorms& b) {
  return a.l0 == b.l0 && a.l2 == b.l2 && a.linf == b.linf;
}

PerturbationNorms measure_norms(const ImageTensor& delta, double support_eps) {
  PerturbationNorms n;
  n.l0 = measure(delta, NormKind::L0, support_eps);
  n.l2 = measure(delta, NormKind::L2, support_eps);
  n.linf = measure(delta, NormKind::Linf, support_eps);
  return n;
}

ImageTensor blend(const ImageTensor& s_o, const ImageTensor& s_a, double t) {
  if (!s_o.same_shape(s_a)) {
    throw ConfigError("blend requires matching sparse component shapes");
  }
  ImageTensor out(s_o.height, s_o.width, s_o.channels);
  for (std::size_t p = 0; p < out.size(); ++p) {
    out.data[p] = t * s_a.data[p] + (1.0 - t) * s_o.data[p];
  }
  return out;
}

ImageTensor clip_to_valid(const ImageTensor& img) {
  ImageTensor out = img;
  for (double& v : out.data) {
    v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

AttackOutcome attack_single(const ImageTensor& x_o, Label r, Oracle& oracle,
                            const AttackParams& params, const ImageLsd& lsd_o,
                            const ImageLsd& lsd_a, const std::string& initial_sample_id) {
  params.validate();

  const ImageTensor l_o = lsd_o.low_rank_image();
  const ImageTensor s_o = lsd_o.sparse_image();
  const ImageTensor s_a = lsd_a.sparse_image();
  if (!x_o.same_shape(s_o) || !x_o.same_shape(s_a)) {
    throw ConfigError("attack_single: decomposition shapes do not match the target image");
  }

  AttackOutcome outcome;
  outcome.lsd_warning = !lsd_o.all_converged() || !lsd_a.all_converged();
  if (outcome.lsd_warning) {
    LSDAT_LOG_WARN("attack on label %d proceeds with a non-converged decomposition", r);
  }

  // Reconstruction the perturbation is measured against (Alg. line 6
  // adds S_i to L_o, so the unperturbed point is L_o + S_o).
  ImageTensor recon(x_o.height, x_o.width, x_o.channels);
  for (std::size_t p = 0; p < recon.size(); ++p) {
    recon.data[p] = l_o.data[p] + s_o.data[p];
  }

  oracle.reset_counter();
  const std::size_t n = x_o.size();
  for (int i = 1; i <= params.max_iter; ++i) {
    const double t = std::min(params.alpha * static_cast<double>(i), 1.0);

    const ImageTensor blended = blend(s_o, s_a, t);
    ImageTensor delta(x_o.height, x_o.width, x_o.channels);
    for (std::size_t p = 0; p < n; ++p) {
      delta.data[p] = blended.data[p] - s_o.data[p];
    }
    delta = project(delta, params.constraint);

    ImageTensor x_i(x_o.height, x_o.width, x_o.channels);
    for (std::size_t p = 0; p < n; ++p) {
      const double s_i = s_o.data[p] + delta.data[p];
      x_i.data[p] = l_o.data[p] + s_i;
    }
    if (params.clip_pixels) {
      x_i = clip_to_valid(x_i);
    }

    Label c;
    try {
      c = oracle.query(x_i);
    } catch (const OracleError& e) {
      outcome.queries_used = static_cast<std::uint64_t>(i - 1);
      outcome.error = e.what();
      return outcome;
    }

    if (c != r) {
      outcome.success = true;
      outcome.queries_used = static_cast<std::uint64_t>(i);
      outcome.initial_sample_id = initial_sample_id;
      ImageTensor final_delta(x_o.height, x_o.width, x_o.channels);
      ImageTensor input_delta(x_o.height, x_o.width, x_o.channels);
      for (std::size_t p = 0; p < n; ++p) {
        final_delta.data[p] = x_i.data[p] - recon.data[p];
        input_delta.data[p] = x_i.data[p] - x_o.data[p];
      }
      outcome.achieved_norms = measure_norms(final_delta);
      outcome.norms_vs_input = measure_norms(input_delta);
      outcome.perturbed = std::move(x_i);
      return outcome;
    }
  }

  outcome.queries_used = static_cast<std::uint64_t>(params.max_iter);
  return outcome;
}

ExplorationSet::ExplorationSet(std::vector<Candidate> candidates, int budget)
    : candidates_(std::move(candidates)), budget_(budget) {
  if (budget_ < 1) {
    throw ConfigError("exploration budget must be at least 1");
  }
}

void ExplorationSet::validate_for(Label r) const {
  if (candidates_.size() > static_cast<std::size_t>(budget_)) {
    throw ConfigError("exploration set exceeds its budget of " + std::to_string(budget_));
  }
  for (const Candidate& c : candidates_) {
    if (c.label == r) {
      throw ConfigError("exploration candidate " + c.sample_id +
                        " carries the target label " + std::to_string(r));
    }
    if (c.image == nullptr) {
      throw ConfigError("exploration candidate " + c.sample_id + " has no image");
    }
  }
}

std::optional<Candidate> ExplorationSet::next() {
  if (cursor_ >= candidates_.size()) {
    return std::nullopt;
  }
  return candidates_[cursor_++];
}

struct LsdCache::Cell {
  std::once_flag flag;
  std::shared_ptr<const ImageLsd> value;
};

LsdCache::LsdCache(RpcaConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

std::shared_ptr<const ImageLsd> LsdCache::get(const ImageTensor& img) {
  const std::uint64_t key = content_hash(img);
  std::shared_ptr<Cell> cell;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto& slot = cells_[key];
    if (!slot) {
      slot = std::make_shared<Cell>();
    }
    cell = slot;
  }
  std::call_once(cell->flag, [&] {
    cell->value = std::make_shared<const ImageLsd>(decompose_image(img, cfg_));
    computes_.fetch_add(1);
  });
  return cell->value;
}

std::size_t LsdCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cells_.size();
}

AttackOutcome attack_with_exploration(const ImageTensor& x_o, Label r,
                                      CandidateProvider& provider, int explore_budget,
                                      Oracle& oracle, const AttackParams& params,
                                      LsdCache& cache) {
  params.validate();
  if (explore_budget < 1) {
    throw ConfigError("exploration budget must be at least 1");
  }

  const std::shared_ptr<const ImageLsd> lsd_o = cache.get(x_o);

  AttackOutcome total;
  int attempts = 0;
  while (attempts < explore_budget) {
    const std::optional<Candidate> cand = provider.next();
    if (!cand) {
      break;
    }
    if (cand->label == r) {
      throw ConfigError("candidate " + cand->sample_id + " carries the target label");
    }
    ++attempts;

    const std::shared_ptr<const ImageLsd> lsd_a = cache.get(*cand->image);
    AttackOutcome attempt =
        attack_single(x_o, r, oracle, params, *lsd_o, *lsd_a, cand->sample_id);

    total.lsd_warning = total.lsd_warning || attempt.lsd_warning;
    total.queries_used += attempt.queries_used;

    if (!attempt.error.empty()) {
      total.error = attempt.error;
      return total;
    }
    if (attempt.success) {
      total.success = true;
      total.perturbed = std::move(attempt.perturbed);
      total.achieved_norms = attempt.achieved_norms;
      total.norms_vs_input = attempt.norms_vs_input;
      total.initial_sample_id = attempt.initial_sample_id;
      return total;
    }
    ++total.unsuccessful_attempts;
  }
  return total;
}

}  // namespace lsdat
