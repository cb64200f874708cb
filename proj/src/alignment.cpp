#include "condinsight/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "condinsight/http.hpp"
#include "condinsight/workorder.hpp"

namespace condinsight {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void normalize_rows(Mat<double>& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double norm = rows.row(i).norm();
    if (norm > 0) {
      rows.row(i) /= norm;
    } else {
      rows.row(i).setZero();
      rows(i, 0) = 1.0;
    }
  }
}

}  // namespace

HashedEmbeddingProvider::HashedEmbeddingProvider(Eigen::Index dimension, Eigen::Index buckets,
                                                 std::uint64_t seed) {
  if (dimension < 1 || buckets < 1)
    throw Error(ErrorCode::ConfigError, "embedding dimension and buckets must be positive");
  // Raw engine output is fully specified by the standard, so the matrix is
  // identical on every platform.
  std::mt19937_64 engine(seed);
  projection_.resize(buckets, dimension);
  for (Eigen::Index r = 0; r < buckets; ++r)
    for (Eigen::Index c = 0; c < dimension; ++c)
      projection_(r, c) = static_cast<double>(engine() >> 11) * 0x1.0p-52 - 1.0;
}

Mat<double> HashedEmbeddingProvider::embed(const std::vector<std::string>& texts) const {
  const Eigen::Index buckets = projection_.rows();
  Mat<double> out = Mat<double>::Zero(static_cast<Eigen::Index>(texts.size()), dimension());
  for (std::size_t t = 0; t < texts.size(); ++t) {
    Vec<double> bag = Vec<double>::Zero(buckets);
    for (const auto& tok : normalize_tokens(texts[t]))
      bag(static_cast<Eigen::Index>(fnv1a(tok) % static_cast<std::uint64_t>(buckets))) += 1.0;
    out.row(static_cast<Eigen::Index>(t)) = bag.transpose() * projection_;
  }
  normalize_rows(out);
  return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string endpoint, std::string token,
                                                 Eigen::Index dimension, int timeout_seconds)
    : endpoint_(std::move(endpoint)),
      token_(std::move(token)),
      dimension_(dimension),
      timeout_seconds_(timeout_seconds) {
  if (dimension_ < 1) throw Error(ErrorCode::ConfigError, "embedding dimension must be positive");
}

Mat<double> RemoteEmbeddingProvider::embed(const std::vector<std::string>& texts) const {
  const Json request{{"texts", texts}};
  const auto res = http_post_json(endpoint_, request.dump(), token_, timeout_seconds_);
  if (res.status != 200)
    throw Error(ErrorCode::GatewayUnavailable,
                "embedding endpoint returned " + std::to_string(res.status) + ": " + res.body);
  Json doc;
  try {
    doc = Json::parse(res.body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("embedding response: ") + e.what());
  }
  if (!doc.contains("vectors") || !doc["vectors"].is_array() || doc["vectors"].size() != texts.size())
    throw Error(ErrorCode::SchemaViolation, "embedding response lacks one vector per text");
  Mat<double> out(static_cast<Eigen::Index>(texts.size()), dimension_);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const Json& row = doc["vectors"][i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != dimension_)
      throw Error(ErrorCode::DimensionMismatch,
                  "embedding " + std::to_string(i) + " does not have dimension " +
                      std::to_string(dimension_));
    for (Eigen::Index c = 0; c < dimension_; ++c) {
      const Json& x = row[static_cast<std::size_t>(c)];
      if (!x.is_number()) throw Error(ErrorCode::SchemaViolation, "non-numeric embedding entry");
      out(static_cast<Eigen::Index>(i), c) = x.get<double>();
    }
  }
  normalize_rows(out);
  return out;
}

std::string fmea_text(const FmeaEntry& e) {
  return e.component + ": " + e.failure_mode + " — " + e.mechanism;
}

Vec<double> source_masses(const std::vector<WorkOrder>& orders, const AlignmentConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(orders.size());
  Vec<double> w(n);
  if (!cfg.recency_tau_days) {
    w.setConstant(1.0 / static_cast<double>(n));
    return w;
  }
  const double tau = *cfg.recency_tau_days;
  if (!(tau > 0)) throw Error(ErrorCode::ConfigError, "recency tau must be > 0");
  for (Eigen::Index i = 0; i < n; ++i) {
    const double age =
        std::max(0.0, static_cast<double>(cfg.now.seconds - orders[static_cast<std::size_t>(i)].reported_date.seconds) /
                          86400.0);
    w(i) = std::exp(-age / tau);
  }
  std::vector<double> terms(w.data(), w.data() + n);
  const double total = ordered_sum(terms);
  w /= total;
  return w;
}

std::vector<FmeaMatch> rank_matches(const Mat<double>& plan, const std::vector<WorkOrder>& orders,
                                    const std::vector<FmeaEntry>& fmea, int top_k) {
  std::vector<FmeaMatch> out;
  std::vector<std::size_t> cols(fmea.size());
  for (std::size_t i = 0; i < orders.size(); ++i) {
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    const auto row = static_cast<Eigen::Index>(i);
    std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
      const double ma = plan(row, static_cast<Eigen::Index>(a));
      const double mb = plan(row, static_cast<Eigen::Index>(b));
      if (ma != mb) return ma > mb;
      if (fmea[a].component != fmea[b].component) return fmea[a].component < fmea[b].component;
      return fmea[a].mechanism < fmea[b].mechanism;
    });
    const std::size_t keep = std::min<std::size_t>(cols.size(), static_cast<std::size_t>(top_k));
    for (std::size_t r = 0; r < keep; ++r) {
      const auto& e = fmea[cols[r]];
      out.push_back({orders[i].wonum, e.component, e.failure_mode, e.mechanism,
                     e.recommended_actions, plan(row, static_cast<Eigen::Index>(cols[r])),
                     static_cast<int>(r + 1)});
    }
  }
  return out;
}

std::vector<FmeaMatch> align_failure_modes(const std::vector<WorkOrder>& orders,
                                           const std::vector<FmeaEntry>& fmea,
                                           const EmbeddingProvider& provider,
                                           const AlignmentConfig& cfg) {
  if (orders.empty() || fmea.empty())
    throw Error(ErrorCode::EmptyInput, "alignment needs at least one work order and one FMEA row");
  if (cfg.top_k < 1) throw Error(ErrorCode::ConfigError, "top_k must be >= 1");

  std::vector<std::string> order_texts, fmea_texts;
  for (const auto& wo : orders) order_texts.push_back(wo.description);
  for (const auto& e : fmea) fmea_texts.push_back(fmea_text(e));
  const Mat<double> sources = provider.embed(order_texts);
  const Mat<double> targets = provider.embed(fmea_texts);

  const Mat<double> cost = cost_matrix(sources, targets);
  const Vec<double> w = source_masses(orders, cfg);
  const Vec<double> m =
      Vec<double>::Constant(static_cast<Eigen::Index>(fmea.size()), 1.0 / static_cast<double>(fmea.size()));
  const auto plan = solve_uot(cost, w, m, cfg.uot);
  return rank_matches(plan.matrix, orders, fmea, cfg.top_k);
}

}  // namespace condinsight
