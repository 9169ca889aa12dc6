#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "vpnext/rng.hpp"
#include "vpnext/tape.hpp"

namespace vpnext {

/// Named parameter tensors in registration order. Registration order is the
/// checkpoint order, so it must stay deterministic for a given config.
template <typename T>
class ParamStore {
  public:
    struct Entry {
        std::string name;
        TensorData<T> value;
        bool decay;  // participates in weight decay
    };

    TensorData<T>& add(const std::string& name, TensorData<T> init, bool decay = true) {
        if (index_.count(name)) throw ValueError("duplicate parameter name: " + name);
        index_[name] = static_cast<int>(entries_.size());
        entries_.push_back(Entry{name, std::move(init), decay});
        return entries_.back().value;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    TensorData<T>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ValueError("unknown parameter: " + name);
        return entries_[static_cast<std::size_t>(it->second)].value;
    }
    const TensorData<T>& at(const std::string& name) const { return const_cast<ParamStore*>(this)->at(name); }

    std::size_t count() const { return entries_.size(); }
    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    std::int64_t total_elements() const {
        std::int64_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    /// Sum of element counts over parameters whose name starts with prefix.
    std::int64_t elements_with_prefix(const std::string& prefix) const {
        std::int64_t n = 0;
        for (const auto& e : entries_)
            if (e.name.rfind(prefix, 0) == 0) n += e.value.size();
        return n;
    }

  private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

/// Leaf bindings of a ParamStore onto one tape. Created once per forward
/// graph; grads are read back from the same vars after backward.
template <typename T>
class Bound {
  public:
    Bound(ParamStore<T>& store, Tape<T>& tape, bool requires_grad)
        : store_(&store), tape_(&tape), requires_grad_(requires_grad) {}

    Var<T> operator[](const std::string& name) {
        auto it = vars_.find(name);
        if (it != vars_.end()) return it->second;
        Var<T> v = tape_->leaf(store_->at(name), requires_grad_);
        vars_.emplace(name, v);
        return v;
    }

    /// Gradients for every bound parameter, in store order, zeros when unused.
    std::vector<TensorData<T>> collect_grads() {
        std::vector<TensorData<T>> out;
        out.reserve(store_->count());
        for (const auto& e : store_->entries()) {
            auto it = vars_.find(e.name);
            if (it == vars_.end())
                out.push_back(TensorData<T>(e.value.shape));
            else
                out.push_back(tape_->grad(it->second));
        }
        return out;
    }

    ParamStore<T>& store() { return *store_; }

  private:
    ParamStore<T>* store_;
    Tape<T>* tape_;
    bool requires_grad_;
    std::unordered_map<std::string, Var<T>> vars_;
};

// init helpers; streams keyed by parameter name so init is stable under
// registration-order changes
template <typename T>
TensorData<T> normal_init(const Shape& shape, double stddev, const Rng& root, const std::string& name) {
    Rng r = root.fork(fnv1a64(name));
    TensorData<T> t(shape);
    for (auto& v : t.data) v = static_cast<T>(r.normal(0.0, stddev));
    return t;
}

template <typename T>
TensorData<T> glorot_init(const Shape& shape, int fan_in, int fan_out, const Rng& root, const std::string& name) {
    return normal_init<T>(shape, std::sqrt(2.0 / (fan_in + fan_out)), root, name);
}

}  // namespace vpnext
