#include "kpj/core/params.hpp"

#include <cmath>
#include <random>

#include "kpj/core/errors.hpp"

namespace kpj::ad {

std::uint64_t derive_seed(std::uint64_t seed, const std::string& name) noexcept {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL + h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t bits) noexcept { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

Tensor ParamStore::add(const std::string& name, Shape shape, Init init, double scale) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  const std::size_t n = shape_size(shape);
  std::vector<double> values(n, 0.0);
  std::mt19937_64 rng(derive_seed(seed_, name));
  switch (init) {
    case Init::zeros: break;
    case Init::ones: std::fill(values.begin(), values.end(), 1.0); break;
    case Init::uniform:
      for (auto& v : values) v = (2.0 * uniform01(rng()) - 1.0) * scale;
      break;
    case Init::xavier: {
      const double fan_out = shape.empty() ? 1.0 : static_cast<double>(shape.back());
      const double fan_in =
          shape.size() >= 2 ? static_cast<double>(shape[shape.size() - 2]) : fan_out;
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& v : values) v = (2.0 * uniform01(rng()) - 1.0) * bound;
      break;
    }
  }
  for (auto& v : values) v = round_to_precision(v);
  Tensor t(std::move(shape), std::move(values), trainable_);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, t);
  return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

void ParamStore::assign(const std::string& name, std::span<const double> values) {
  Tensor t = get(name);
  if (values.size() != t.size()) {
    throw DimensionError("parameter '" + name + "' expects " + std::to_string(t.size()) +
                         " values, got " + std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), t.mutable_data().begin());
}

void ParamStore::set_trainable(bool on) {
  trainable_ = on;
  for (auto& [name, t] : entries_) {
    t.set_requires_grad(on);
    if (!on) t.clear_grad();
  }
}

void ParamStore::clear_grads() {
  for (auto& [name, t] : entries_) t.clear_grad();
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

}  // namespace kpj::ad
