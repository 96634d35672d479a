#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kpj/core/tensor.hpp"

namespace kpj::ad {

enum class Init { zeros, ones, uniform, xavier };

/// Named, insertion-ordered collection of trainable leaves.
///
/// Every parameter draws its initial values from its own generator seeded by
/// (store seed, parameter name), so adding or removing unrelated parameters
/// never changes the values of the others.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Creates a parameter. `uniform` draws from U(-scale, scale) (scale
  /// defaults to 0.1); `xavier` uses the Glorot bound over the last two
  /// dimensions.
  Tensor add(const std::string& name, Shape shape, Init init, double scale = 0.1);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

  /// Overwrites values of an existing parameter (shape must match).
  void assign(const std::string& name, std::span<const double> values);
  void set_trainable(bool on);
  bool trainable() const { return trainable_; }
  void clear_grads();
  std::size_t parameter_count() const;

 private:
  std::uint64_t seed_;
  bool trainable_ = true;
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// splitmix-style mixing of a seed with a name; stable across platforms.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& name) noexcept;

/// Uniform double in [0, 1) from a 64-bit engine, independent of the
/// standard library's distribution implementation.
double uniform01(std::uint64_t bits) noexcept;

}  // namespace kpj::ad
