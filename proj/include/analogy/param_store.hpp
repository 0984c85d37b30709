#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "analogy/tensor.hpp"

namespace analogy {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline constexpr double kDefaultLearningRate = 1e-4;

// Named trainable tensors in insertion order, plus Adam moments and the
// shared step counter.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
  };

  // Registers a leaf parameter; throws ContractError on a duplicate name.
  Tensor& add(const std::string& name, Shape shape, std::vector<double> values);

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t step) { step_ = step; }

  void zero_grad();

  // Deep copy with fresh leaves; graph history and gradients are not shared.
  ParamStore clone() const;

  // Exact value, moment and step equality.
  bool bitwise_equal(const ParamStore& other) const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::int64_t step_ = 0;
};

// One bias-corrected Adam update over every entry, then zeroes gradients.
// Throws ContractError naming the first parameter without a gradient.
void adam_step(ParamStore& store, double lr = kDefaultLearningRate,
               const AdamConfig& config = {});

}  // namespace analogy
