#pragma once

// Lossy compressors Q with ||Q(w) - w||^2 <= gamma ||w||^2, and the
// error-feedback step that carries the compression residual forward.

#include "elastic/types.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace elastic {

enum class CompressorKind { identity, topk, onebit };

/// Keeps the K entries of largest magnitude; ties go to the lowest index.
inline ParamVector topk(const ParamVector& w, Eigen::Index k) {
  const Eigen::Index d = w.size();
  if (k < 1 || k > d) throw ConfigError("topk: K must lie in [1, d]");
  if (k == d) return w;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto before = [&w](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(w[a]);
    const double mb = std::abs(w[b]);
    return ma > mb || (ma == mb && a < b);
  };
  std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), before);

  ParamVector out = ParamVector::Zero(d);
  for (Eigen::Index j = 0; j < k; ++j) out[order[static_cast<std::size_t>(j)]] = w[order[static_cast<std::size_t>(j)]];
  return out;
}

/// One-bit quantization: entries with w_i >= 0 become the mean of that class,
/// negative entries the mean of the negative class.
inline ParamVector onebit(const ParamVector& w) {
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  Eigen::Index pos_count = 0;
  Eigen::Index neg_count = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] >= 0.0) {
      pos_sum += w[i];
      ++pos_count;
    } else {
      neg_sum += w[i];
      ++neg_count;
    }
  }
  const double pos_mean = pos_count > 0 ? pos_sum / static_cast<double>(pos_count) : 0.0;
  const double neg_mean = neg_count > 0 ? neg_sum / static_cast<double>(neg_count) : 0.0;
  ParamVector out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) out[i] = w[i] >= 0.0 ? pos_mean : neg_mean;
  return out;
}

class Compressor {
 public:
  static Compressor identity(Eigen::Index d) { return Compressor(CompressorKind::identity, d, d); }
  static Compressor topk(Eigen::Index d, Eigen::Index k) {
    if (k < 1 || k > d) throw ConfigError("topk: K must lie in [1, d]");
    return Compressor(CompressorKind::topk, d, k);
  }
  static Compressor onebit(Eigen::Index d) { return Compressor(CompressorKind::onebit, d, d); }

  CompressorKind kind() const noexcept { return kind_; }
  Eigen::Index dimension() const noexcept { return d_; }
  Eigen::Index k() const noexcept { return k_; }

  /// Contraction factor: (d-K)/d for TopK, 1 - 1/d for one-bit, 0 for identity.
  double gamma() const noexcept {
    const double d = static_cast<double>(d_);
    switch (kind_) {
      case CompressorKind::identity: return 0.0;
      case CompressorKind::topk: return (d - static_cast<double>(k_)) / d;
      case CompressorKind::onebit: return 1.0 - 1.0 / d;
    }
    return 0.0;
  }

  ParamVector operator()(const ParamVector& w) const {
    require_dimension(w, d_, "compressor");
    switch (kind_) {
      case CompressorKind::identity: return w;
      case CompressorKind::topk: return elastic::topk(w, k_);
      case CompressorKind::onebit: return elastic::onebit(w);
    }
    return w;
  }

 private:
  Compressor(CompressorKind kind, Eigen::Index d, Eigen::Index k) : kind_(kind), d_(d), k_(k) {
    if (d < 1) throw ConfigError("compressor: dimension must be >= 1");
  }

  CompressorKind kind_;
  Eigen::Index d_;
  Eigen::Index k_;
};

/// Compressor choice independent of the dimension, as written on the command
/// line: "identity", "onebit" or "topk:K".
struct CompressorSpec {
  CompressorKind kind = CompressorKind::identity;
  Eigen::Index k = 0;

  Compressor build(Eigen::Index d) const {
    switch (kind) {
      case CompressorKind::identity: return Compressor::identity(d);
      case CompressorKind::topk: return Compressor::topk(d, k);
      case CompressorKind::onebit: return Compressor::onebit(d);
    }
    return Compressor::identity(d);
  }

  friend bool operator==(const CompressorSpec&, const CompressorSpec&) = default;
};

inline CompressorSpec parse_compressor(std::string_view text) {
  if (text == "identity") return {CompressorKind::identity, 0};
  if (text == "onebit") return {CompressorKind::onebit, 0};
  if (text.starts_with("topk:")) {
    const std::string_view digits = text.substr(5);
    long long k = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && k >= 1) return {CompressorKind::topk, k};
  }
  throw ConfigError("unknown compressor '" + std::string(text) + "' (expected identity, onebit or topk:K)");
}

inline std::string to_string(const CompressorSpec& spec) {
  switch (spec.kind) {
    case CompressorKind::identity: return "identity";
    case CompressorKind::onebit: return "onebit";
    case CompressorKind::topk: return "topk:" + std::to_string(spec.k);
  }
  return "identity";
}

struct ErrorFeedbackResult {
  ParamVector payload;
  ParamVector new_error;
};

/// w = error_acc + alpha * grad; payload = Q(w); new_error = w - payload.
inline ErrorFeedbackResult ef_update(const ParamVector& error_acc, const ParamVector& grad, double alpha,
                                     const Compressor& q) {
  require_dimension(error_acc, q.dimension(), "ef_update error");
  require_dimension(grad, q.dimension(), "ef_update gradient");
  ParamVector w = error_acc + alpha * grad;
  ParamVector payload = q(w);
  ParamVector residual = w - payload;
  return {std::move(payload), std::move(residual)};
}

}  // namespace elastic
