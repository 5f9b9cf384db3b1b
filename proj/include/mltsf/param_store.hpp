#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mltsf/tensor.hpp"

namespace mltsf {

/// Named trainable parameters, iterated in lexicographic name order.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor>;

  // Registers a new parameter and marks it as requiring a gradient.
  Tensor& add(const std::string& name, Tensor value);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.contains(name); }

  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  void zero_grad();

  // Independent copy of the values with requires_grad cleared; evaluating a
  // model against it records no graph.
  ParamStore detached() const;
  ParamStore clone() const;

  // Copies values from another store with identical names and shapes.
  void assign_values(const ParamStore& other);

 private:
  Map params_;
};

// Uniform(-bound, bound) fill, consuming rng in row-major order.
void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng);

}  // namespace mltsf
