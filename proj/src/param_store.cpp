#include "mltsf/param_store.hpp"

#include <algorithm>

#include "mltsf/error.hpp"

namespace mltsf {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (params_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
  value.set_requires_grad(true);
  return params_.emplace(name, std::move(value)).first->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

ParamStore ParamStore::detached() const {
  ParamStore out;
  for (const auto& [name, t] : params_) out.params_.emplace(name, t.detach());
  return out;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : params_) out.params_.emplace(name, t.clone());
  return out;
}

void ParamStore::assign_values(const ParamStore& other) {
  if (other.size() != size()) throw ConfigError("assign_values: parameter count mismatch");
  for (auto& [name, t] : params_) {
    const Tensor& src = other.get(name);
    if (src.shape() != t.shape()) throw ConfigError("assign_values: shape mismatch for " + name);
    std::copy(src.values().begin(), src.values().end(), t.mutable_values().begin());
  }
}

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.mutable_values()) v = dist(rng);
}

}  // namespace mltsf
