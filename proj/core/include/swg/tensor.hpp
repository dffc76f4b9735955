#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <vector>

namespace swg {

// Dense row-major tensor of doubles. All model math runs in 64-bit; the
// on-disk format is float32 (see save/load).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<size_t> shape, double fill = 0.0);
    Tensor(std::vector<size_t> shape, std::vector<double> values);

    static Tensor zeros(std::vector<size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<size_t> shape, double v) { return Tensor(std::move(shape), v); }
    static Tensor ones(std::vector<size_t> shape) { return Tensor(std::move(shape), 1.0); }
    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }
    static Tensor identity(size_t n);

    const std::vector<size_t>& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t dim(size_t i) const { return shape_.at(i); }
    size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double& at(std::initializer_list<size_t> idx) { return data_[offset(idx)]; }
    double at(std::initializer_list<size_t> idx) const { return data_[offset(idx)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    void fill(double v);
    bool all_finite() const;

    // Shape string like "[2x3x4]" for diagnostics.
    std::string shape_str() const;
    static std::string shape_str(const std::vector<size_t>& shape);

private:
    size_t offset(std::initializer_list<size_t> idx) const;

    std::vector<size_t> shape_;
    std::vector<double> data_;
};

// "SWGT" flat binary layout: magic, u32 rank, rank x u64 extents,
// little-endian float32 payload in row-major order.
void save_tensor(std::ostream& os, const Tensor& t);
Tensor load_tensor(std::istream& is);
void save_tensor_file(const std::string& path, const Tensor& t);
Tensor load_tensor_file(const std::string& path);

size_t shape_numel(const std::vector<size_t>& shape);

}  // namespace swg
