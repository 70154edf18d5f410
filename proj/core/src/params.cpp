/* Copyright 2026 The FuseMT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "fusemt/params.hpp"

#include <cstring>

namespace fusemt {

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw ContractError("uniform_index: empty range");
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

template <typename T>
Tensor<T>& ParameterSet<T>::add(std::string name, Tensor<T> tensor) {
  auto [it, inserted] = tensors_.emplace(std::move(name), std::move(tensor));
  if (!inserted) throw ContractError("duplicate parameter name '" + it->first + "'");
  return it->second;
}

template <typename T>
Tensor<T>& ParameterSet<T>::get(std::string_view name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

template <typename T>
const Tensor<T>& ParameterSet<T>::get(std::string_view name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

template <typename T>
std::size_t ParameterSet<T>::num_values() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

template <typename T>
void ParameterSet<T>::set_requires_grad(bool on) {
  for (auto& [name, t] : tensors_) t.set_requires_grad(on);
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

template <typename T>
std::uint64_t ParameterSet<T>::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : tensors_) {
    mix(name.data(), name.size());
    for (std::size_t d : t.shape()) {
      const auto d64 = static_cast<std::uint64_t>(d);
      mix(&d64, sizeof d64);
    }
    mix(t.data(), t.size() * sizeof(T));
  }
  return h;
}

template class ParameterSet<float>;
template class ParameterSet<double>;

}  // namespace fusemt
