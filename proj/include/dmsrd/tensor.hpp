#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "dmsrd/common.hpp"

namespace dmsrd {

struct Tensor {
    std::vector<std::size_t> shape;
    Vec data;  // row-major

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, double fill = 0.0);

    std::size_t size() const { return data.size(); }
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }
};

// Ordered, named parameter container. Insertion order defines the
// flattening order, so checkpoints and finite-difference indexing are
// stable across runs.
class ParamSet {
  public:
    void add(const std::string& name, Tensor t);
    bool has(const std::string& name) const;
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;

    std::size_t count() const { return entries_.size(); }
    const std::string& name(std::size_t i) const { return entries_[i].first; }
    Tensor& tensor(std::size_t i) { return entries_[i].second; }
    const Tensor& tensor(std::size_t i) const { return entries_[i].second; }

    std::size_t total_size() const;
    Vec flatten() const;
    void unflatten(const Vec& flat);

    // Gradient container with identical names/shapes, zero-filled.
    ParamSet zeros_like() const;

    bool finite() const;

    // In-place axpy over every tensor: this += a * other.
    void add_scaled(const ParamSet& other, double a);

  private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

// Binary checkpoint: magic string, tensor count, then per tensor the
// name, rank, dims and a row-major 64-bit float payload.
void save_checkpoint(const ParamSet& params, const std::string& path);
ParamSet load_checkpoint(const std::string& path);

}  // namespace dmsrd
