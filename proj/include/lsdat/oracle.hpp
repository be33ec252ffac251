#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lsdat/image.hpp"

namespace lsdat {

using Label = int;

struct QueryCounter {
  std::uint64_t total = 0;
  std::uint64_t per_attack = 0;
};

/// Black-box top-1 classifier. query() increments the counters by
/// exactly one per successful classification; failures (transport,
/// replay mismatch) throw without counting.
class Oracle {
 public:
  virtual ~Oracle() = default;

  Label query(const ImageTensor& img) {
    const Label label = classify(img);
    total_.fetch_add(1, std::memory_order_relaxed);
    per_attack_.fetch_add(1, std::memory_order_relaxed);
    return label;
  }

  /// Marks the start of an attack: per-attack count drops to zero, the
  /// lifetime total is kept.
  void reset_counter() { per_attack_.store(0, std::memory_order_relaxed); }

  QueryCounter read_counter() const {
    return {total_.load(std::memory_order_relaxed), per_attack_.load(std::memory_order_relaxed)};
  }

  virtual int class_count() const = 0;

 protected:
  virtual Label classify(const ImageTensor& img) = 0;

 private:
  std::atomic<std::uint64_t> total_{0};
  std::atomic<std::uint64_t> per_attack_{0};
};

/// argmax_c w_c . flatten(x) + b_c, ties to the lowest class id.
class LinearOracle : public Oracle {
 public:
  LinearOracle(std::vector<std::vector<double>> weights, std::vector<double> biases);

  int class_count() const override { return static_cast<int>(weights_.size()); }

 protected:
  Label classify(const ImageTensor& img) override;

 private:
  std::vector<std::vector<double>> weights_;
  std::vector<double> biases_;
};

/// Nearest centroid by l2 distance, ties to the lowest class id.
class CentroidOracle : public Oracle {
 public:
  explicit CentroidOracle(std::vector<ImageTensor> centroids);

  int class_count() const override { return static_cast<int>(centroids_.size()); }

 protected:
  Label classify(const ImageTensor& img) override;

 private:
  std::vector<ImageTensor> centroids_;
};

struct RemoteConfig {
  std::string url;         // scheme://host:port
  int timeout_ms = 1000;
  int retries = 2;         // additional attempts after a failure
  int class_count = 2;
};

/// POST /classify with JSON {"height","width","channels","pixels"};
/// expects {"label": int}. Only a parsed 200 response counts as a query;
/// failed round-trips are retried and never counted.
class RemoteOracle : public Oracle {
 public:
  explicit RemoteOracle(RemoteConfig cfg);

  int class_count() const override { return cfg_.class_count; }

 protected:
  Label classify(const ImageTensor& img) override;

 private:
  RemoteConfig cfg_;
};

struct ReplayEntry {
  std::uint64_t image_hash = 0;
  Label label = 0;
};

/// Replays a recorded query trace in order. Queries must match the
/// recorded image hashes exactly; divergence or exhaustion throws
/// ReplayError.
class ReplayOracle : public Oracle {
 public:
  ReplayOracle(std::vector<ReplayEntry> trace, int class_count);

  int class_count() const override { return class_count_; }
  std::size_t position() const { return position_; }

 protected:
  Label classify(const ImageTensor& img) override;

 private:
  std::vector<ReplayEntry> trace_;
  std::size_t position_ = 0;
  int class_count_ = 0;
};

/// Wraps another oracle and captures its (image hash, label) trace for
/// later replay. Queries are forwarded through the inner oracle's
/// counting query() path.
class RecordingOracle : public Oracle {
 public:
  explicit RecordingOracle(Oracle& inner) : inner_(inner) {}

  int class_count() const override { return inner_.class_count(); }
  const std::vector<ReplayEntry>& trace() const { return trace_; }

 protected:
  Label classify(const ImageTensor& img) override {
    const Label label = inner_.query(img);
    trace_.push_back({content_hash(img), label});
    return label;
  }

 private:
  Oracle& inner_;
  std::vector<ReplayEntry> trace_;
};

std::unique_ptr<Oracle> make_linear_oracle(std::vector<std::vector<double>> weights,
                                           std::vector<double> biases);
std::unique_ptr<Oracle> make_centroid_oracle(std::vector<ImageTensor> centroids);
std::unique_ptr<Oracle> make_remote_oracle(RemoteConfig cfg);

void save_trace(const std::filesystem::path& path, const std::vector<ReplayEntry>& trace,
                int class_count);
std::unique_ptr<ReplayOracle> load_replay_oracle(const std::filesystem::path& path);

}  // namespace lsdat
