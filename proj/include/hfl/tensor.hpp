#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfl {

// Dense row-major tensor. Small models only, so no view/stride machinery.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        std::size_t n = 1;
        for (int d : shape_) {
            if (d < 0) throw std::invalid_argument("tensor: negative dimension");
            n *= static_cast<std::size_t>(d);
        }
        data_.assign(n, T(0));
    }

    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // index helpers for the ranks used in this project
    T& at2(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    const T& at2(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }

    T& at4(int n, int m, int h, int w) {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + m) * shape_[2] + h) * shape_[3] + w];
    }
    const T& at4(int n, int m, int h, int w) const {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + m) * shape_[2] + h) * shape_[3] + w];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    std::vector<int> shape_;
    std::vector<T> data_;
};

inline std::string shape_str(const std::vector<int>& s) {
    std::string r = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) r += ",";
        r += std::to_string(s[i]);
    }
    return r + ")";
}

}  // namespace hfl
