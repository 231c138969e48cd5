#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "slu/errors.hpp"

namespace slu {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Dense row-major tensor of rank 0..2. Rank 0 is a scalar, rank 2 is
// rows x cols.
template <typename S>
struct Tensor {
    Shape shape;
    std::vector<S> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(static_cast<std::size_t>(numel(shape)), S(0)) {}
    Tensor(Shape s, std::vector<S> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::int64_t>(data.size()) != numel(shape))
            throw ShapeError("tensor data size does not match shape " + shape_str(shape));
    }

    std::size_t size() const { return data.size(); }
};

// A named trainable (or frozen) tensor.
template <typename S>
struct Parameter {
    std::string name;
    Tensor<S> value;
    bool requires_grad = true;
};

// Insertion-ordered map name -> Parameter. Iteration order is creation
// order, so checkpoints, optimizer sweeps and RNG consumption are all
// deterministic.
template <typename S>
class ParamStore {
  public:
    Parameter<S>& create(const std::string& name, Shape shape, bool requires_grad = true) {
        if (by_name_.count(name)) throw ContractError("duplicate parameter name: " + name);
        auto p = std::make_unique<Parameter<S>>();
        p->name = name;
        p->value = Tensor<S>(std::move(shape));
        p->requires_grad = requires_grad;
        by_name_.emplace(name, items_.size());
        items_.push_back(std::move(p));
        return *items_.back();
    }

    Parameter<S>* find(const std::string& name) {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : items_[it->second].get();
    }
    const Parameter<S>* find(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : items_[it->second].get();
    }
    Parameter<S>& at(const std::string& name) {
        if (auto* p = find(name)) return *p;
        throw ContractError("unknown parameter: " + name);
    }
    const Parameter<S>& at(const std::string& name) const {
        if (auto* p = find(name)) return *p;
        throw ContractError("unknown parameter: " + name);
    }

    std::size_t size() const { return items_.size(); }
    Parameter<S>& operator[](std::size_t i) { return *items_[i]; }
    const Parameter<S>& operator[](std::size_t i) const { return *items_[i]; }

    std::int64_t total_values() const {
        std::int64_t n = 0;
        for (const auto& p : items_) n += numel(p->value.shape);
        return n;
    }

  private:
    std::vector<std::unique_ptr<Parameter<S>>> items_;
    std::unordered_map<std::string, std::size_t> by_name_;
};

// Named gradient buffers. Entries keep insertion order; zeros_like covers
// every requires_grad parameter of a store so "no gradient flowed" shows up
// as an exact zero buffer rather than a missing entry.
template <typename S>
class GradMap {
  public:
    GradMap() = default;

    static GradMap zeros_like(const ParamStore<S>& store) {
        GradMap g;
        for (std::size_t i = 0; i < store.size(); ++i) {
            const auto& p = store[i];
            if (p.requires_grad) g.insert(p.name, std::vector<S>(p.value.size(), S(0)));
        }
        return g;
    }

    void insert(const std::string& name, std::vector<S> values) {
        if (by_name_.count(name)) throw ContractError("duplicate gradient entry: " + name);
        by_name_.emplace(name, entries_.size());
        entries_.emplace_back(name, std::move(values));
    }

    std::vector<S>* find(const std::string& name) {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : &entries_[it->second].second;
    }
    const std::vector<S>* find(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : &entries_[it->second].second;
    }
    std::vector<S>& at(const std::string& name) {
        if (auto* v = find(name)) return *v;
        throw ContractError("missing gradient entry: " + name);
    }
    const std::vector<S>& at(const std::string& name) const {
        if (auto* v = find(name)) return *v;
        throw ContractError("missing gradient entry: " + name);
    }

    void accumulate(const std::string& name, std::span<const S> values) {
        auto& dst = at(name);
        if (dst.size() != values.size())
            throw ShapeError("gradient size mismatch for " + name);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += values[i];
    }

    void scale(S factor) {
        for (auto& [name, v] : entries_)
            for (auto& x : v) x *= factor;
    }

    double global_norm() const {
        double sq = 0;
        for (const auto& [name, v] : entries_)
            for (S x : v) sq += static_cast<double>(x) * static_cast<double>(x);
        return std::sqrt(sq);
    }

    std::size_t size() const { return entries_.size(); }
    const std::pair<std::string, std::vector<S>>& operator[](std::size_t i) const { return entries_[i]; }
    std::pair<std::string, std::vector<S>>& operator[](std::size_t i) { return entries_[i]; }

  private:
    std::vector<std::pair<std::string, std::vector<S>>> entries_;
    std::unordered_map<std::string, std::size_t> by_name_;
};

}  // namespace slu
