#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpnext {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (int e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValueError : std::runtime_error {
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonFiniteError : std::runtime_error {
    explicit NonFiniteError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dense row-major N-d array. Plain value type, no differentiation record;
/// the tape in tape.hpp wraps these into graph nodes.
template <typename T>
struct TensorData {
    Shape shape;
    std::vector<T> data;

    TensorData() = default;

    explicit TensorData(Shape s) : shape(std::move(s)), data(static_cast<std::size_t>(numel(shape)), T(0)) {}

    TensorData(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::int64_t>(data.size()) != numel(shape))
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }

    static TensorData full(Shape s, T v) {
        TensorData t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static TensorData scalar(T v) { return TensorData({1}, {v}); }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    // convenience indexing (tests and small paths only)
    T& at(std::initializer_list<int> idx) {
        if (idx.size() != shape.size())
            throw ShapeError("at(): " + std::to_string(idx.size()) + " indices for rank " +
                             std::to_string(shape.size()) + " tensor");
        std::int64_t off = 0;
        std::size_t k = 0;
        for (int i : idx) {
            off = off * shape[k] + i;
            ++k;
        }
        return data[static_cast<std::size_t>(off)];
    }
    T at(std::initializer_list<int> idx) const { return const_cast<TensorData*>(this)->at(idx); }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    TensorData<U> cast() const {
        TensorData<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValueError(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace vpnext
