#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsdat/constraints.hpp"
#include "lsdat/image.hpp"
#include "lsdat/oracle.hpp"
#include "lsdat/rpca.hpp"

namespace lsdat {

struct AttackParams {
  double alpha = 0.05;  // sparse traversing rate
  int max_iter = 20;
  PerturbationConstraint constraint = LinfBudget{0.1};
  bool clip_pixels = true;

  /// Throws ConfigError unless 0 < alpha <= 1 and max_iter >= 1 and the
  /// constraint budget is valid.
  void validate() const;
};

struct PerturbationNorms {
  double l0 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
};

bool operator==(const PerturbationNorms& a, const PerturbationNorms& b);

PerturbationNorms measure_norms(const ImageTensor& delta,
                                double support_eps = kDefaultSupportEps);

struct AttackOutcome {
  bool success = false;
  std::optional<ImageTensor> perturbed;
  std::uint64_t queries_used = 0;
  /// Norms of the final perturbation relative to the reconstruction
  /// L_o + S_o -- the quantity the projection constrains.
  PerturbationNorms achieved_norms;
  /// Same perturbation measured against the raw input X_o; differs from
  /// achieved_norms by the decomposition residual.
  PerturbationNorms norms_vs_input;
  std::string initial_sample_id;  // empty unless an attempt succeeded
  int unsuccessful_attempts = 0;  // j: fully exhausted candidates
  bool lsd_warning = false;       // a decomposition did not converge
  std::string error;              // oracle hard-error text; empty when clean
};

/// t * S_a + (1 - t) * S_o, elementwise. Shapes must match.
ImageTensor blend(const ImageTensor& s_o, const ImageTensor& s_a, double t);

/// Entrywise clamp to the valid pixel range [0, 1].
ImageTensor clip_to_valid(const ImageTensor& img);

/// Walks the sparse path from S_o toward S_a, querying the oracle once
/// per step, and stops at the first label flip. Both decompositions are
/// taken as precomputed inputs; this function never decomposes.
AttackOutcome attack_single(const ImageTensor& x_o, Label r, Oracle& oracle,
                            const AttackParams& params, const ImageLsd& lsd_o,
                            const ImageLsd& lsd_a, const std::string& initial_sample_id = "");

/// One initial adversarial sample: id, manifest label, borrowed image.
struct Candidate {
  std::string sample_id;
  Label label = 0;
  const ImageTensor* image = nullptr;
};

/// Yields initial samples one at a time; nullopt when exhausted.
class CandidateProvider {
 public:
  virtual ~CandidateProvider() = default;
  virtual std::optional<Candidate> next() = 0;
};

/// Fixed, pre-validated exploration set over borrowed images.
class ExplorationSet : public CandidateProvider {
 public:
  ExplorationSet(std::vector<Candidate> candidates, int budget);

  /// Throws ConfigError if the set exceeds its budget or any candidate
  /// carries the target label r.
  void validate_for(Label r) const;

  std::optional<Candidate> next() override;
  std::size_t size() const { return candidates_.size(); }
  int budget() const { return budget_; }

 private:
  std::vector<Candidate> candidates_;
  int budget_ = 0;
  std::size_t cursor_ = 0;
};

/// Content-addressed store of image decompositions. Each distinct image
/// is decomposed exactly once, also under concurrent access.
class LsdCache {
 public:
  explicit LsdCache(RpcaConfig cfg = {});

  std::shared_ptr<const ImageLsd> get(const ImageTensor& img);

  /// Number of decompose_image calls actually performed.
  std::size_t compute_count() const { return computes_.load(); }
  std::size_t size() const;
  const RpcaConfig& config() const { return cfg_; }

 private:
  struct Cell;
  RpcaConfig cfg_;
  mutable std::mutex mu_;
  std::unordered_map<std::uint64_t, std::shared_ptr<Cell>> cells_;
  std::atomic<std::size_t> computes_{0};
};

/// Tries up to G candidates from the provider in order, running
/// attack_single for each, and stops at the first success. Total
/// queries follow j * max_iter + N_Q; an oracle hard error aborts the
/// exploration with the error recorded and queries counted as issued.
AttackOutcome attack_with_exploration(const ImageTensor& x_o, Label r,
                                      CandidateProvider& provider, int explore_budget,
                                      Oracle& oracle, const AttackParams& params,
                                      LsdCache& cache);

}  // namespace lsdat
