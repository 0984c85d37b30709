#include "analogy/param_store.hpp"

#include <cmath>
#include <cstring>

namespace analogy {

Tensor& ParamStore::add(const std::string& name, Shape shape,
                        std::vector<double> values) {
  if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
  Tensor t(std::move(shape), std::move(values), /*requires_grad=*/true);
  const std::size_t n = t.numel();
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{name, t, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
  return entries_.back().value;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return entries_[it->second].value;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return entries_[it->second].value;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& e : entries_) {
    Tensor& t = out.add(e.name, e.value.shape(),
                        std::vector<double>(e.value.data().begin(), e.value.data().end()));
    (void)t;
    auto& copy = out.entries_.back();
    copy.first_moment = e.first_moment;
    copy.second_moment = e.second_moment;
  }
  out.step_ = step_;
  return out;
}

namespace {

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

bool ParamStore::bitwise_equal(const ParamStore& other) const {
  if (step_ != other.step_ || entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.value.shape() != b.value.shape()) return false;
    if (!same_bits(a.value.data(), b.value.data()) ||
        !same_bits(a.first_moment, b.first_moment) ||
        !same_bits(a.second_moment, b.second_moment)) {
      return false;
    }
  }
  return true;
}

void adam_step(ParamStore& store, double lr, const AdamConfig& config) {
  for (const auto& e : store.entries()) {
    if (!e.value.has_grad()) {
      throw ContractError("adam_step: parameter '" + e.name + "' has no gradient");
    }
  }
  store.set_step(store.step() + 1);
  const double t = static_cast<double>(store.step());
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  for (auto& e : store.entries()) {
    auto values = e.value.mutable_data();
    auto grad = e.value.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      e.first_moment[i] = config.beta1 * e.first_moment[i] + (1.0 - config.beta1) * g;
      e.second_moment[i] = config.beta2 * e.second_moment[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = e.first_moment[i] / bias1;
      const double v_hat = e.second_moment[i] / bias2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    e.value.zero_grad();
  }
}

}  // namespace analogy
