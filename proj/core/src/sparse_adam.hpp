#pragma once

// Column-sparse Adam shared by the retriever and reader trainers.

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace slotfill::detail {

struct AdamOptions {
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-batch gradient for a set of columns of fixed width, kept in
/// first-touch order.
class ColumnAccumulator {
 public:
  explicit ColumnAccumulator(std::size_t width) : width_(width) {}

  std::span<float> column(std::uint32_t feature) {
    auto [it, inserted] = slot_.try_emplace(feature, features_.size());
    if (inserted) {
      features_.push_back(feature);
      values_.resize(values_.size() + width_, 0.0f);
    }
    return {values_.data() + it->second * width_, width_};
  }

  const std::vector<std::uint32_t>& features() const noexcept { return features_; }
  std::span<const float> column_at(std::size_t i) const { return {values_.data() + i * width_, width_}; }

  void clear() {
    slot_.clear();
    features_.clear();
    values_.clear();
  }

 private:
  std::size_t width_;
  std::unordered_map<std::uint32_t, std::size_t> slot_;
  std::vector<std::uint32_t> features_;
  std::vector<float> values_;
};

class SparseAdam {
 public:
  SparseAdam(std::size_t width, AdamOptions options) : width_(width), options_(options) {}

  void begin_step() {
    ++step_;
    correction1_ = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
    correction2_ = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  }

  void update(std::uint32_t feature, std::span<float> weights, std::span<const float> grad) {
    auto [it, inserted] = slot_.try_emplace(feature, m_.size() / width_);
    if (inserted) {
      m_.resize(m_.size() + width_, 0.0f);
      v_.resize(v_.size() + width_, 0.0f);
    }
    float* m = m_.data() + it->second * width_;
    float* v = v_.data() + it->second * width_;
    const auto b1 = static_cast<float>(options_.beta1);
    const auto b2 = static_cast<float>(options_.beta2);
    for (std::size_t i = 0; i < width_; ++i) {
      const float g = grad[i];
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      const double m_hat = m[i] / correction1_;
      const double v_hat = v[i] / correction2_;
      weights[i] -= static_cast<float>(options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon));
    }
  }

  std::uint64_t step() const noexcept { return step_; }

 private:
  std::size_t width_;
  AdamOptions options_;
  std::uint64_t step_ = 0;
  double correction1_ = 1.0;
  double correction2_ = 1.0;
  std::unordered_map<std::uint32_t, std::size_t> slot_;
  std::vector<float> m_;
  std::vector<float> v_;
};

}  // namespace slotfill::detail
