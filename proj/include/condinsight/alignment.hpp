// Work-order to FMEA mechanism alignment over a shared embedding space.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "condinsight/core.hpp"
#include "condinsight/uot.hpp"

namespace condinsight {

/// Maps texts to unit-norm rows of a fixed dimension. Implementations must be
/// deterministic; callers always embed in batches.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Mat<double> embed(const std::vector<std::string>& texts) const = 0;
  virtual Eigen::Index dimension() const = 0;
};

/// Offline provider: hashed bag of normalized tokens projected through a fixed
/// seeded random matrix, then normalized. Texts without tokens map to e_0.
class HashedEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashedEmbeddingProvider(Eigen::Index dimension = 64, Eigen::Index buckets = 1024,
                                   std::uint64_t seed = 0x5eedULL);
  Mat<double> embed(const std::vector<std::string>& texts) const override;
  Eigen::Index dimension() const override { return projection_.cols(); }

 private:
  Mat<double> projection_;  // buckets x dimension
};

/// POSTs {"texts": [...]} and expects {"vectors": [[...], ...]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(std::string endpoint, std::string token, Eigen::Index dimension,
                          int timeout_seconds = 30);
  Mat<double> embed(const std::vector<std::string>& texts) const override;
  Eigen::Index dimension() const override { return dimension_; }

 private:
  std::string endpoint_;
  std::string token_;
  Eigen::Index dimension_;
  int timeout_seconds_;
};

struct FmeaMatch {
  std::string wonum;
  std::string component;
  std::string failure_mode;
  std::string mechanism;
  std::vector<std::string> recommended_actions;
  double mass = 0.0;
  int rank = 1;

  bool operator==(const FmeaMatch&) const = default;
};

struct AlignmentConfig {
  UotConfig uot;
  int top_k = 5;
  /// When set, w_i is proportional to exp(-age_i / tau) with age in days before `now`.
  std::optional<double> recency_tau_days;
  Timestamp now;
};

/// "component: failure_mode — mechanism"
std::string fmea_text(const FmeaEntry& entry);

/// Uniform 1/n, or normalized recency weights.
Vec<double> source_masses(const std::vector<WorkOrder>& orders, const AlignmentConfig& cfg);

std::vector<FmeaMatch> align_failure_modes(const std::vector<WorkOrder>& orders,
                                           const std::vector<FmeaEntry>& fmea,
                                           const EmbeddingProvider& provider,
                                           const AlignmentConfig& cfg);

/// Per-row ranking of a plan: top_k columns by mass, ties by (component, mechanism).
std::vector<FmeaMatch> rank_matches(const Mat<double>& plan, const std::vector<WorkOrder>& orders,
                                    const std::vector<FmeaEntry>& fmea, int top_k);

}  // namespace condinsight
