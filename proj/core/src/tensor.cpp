#include "swg/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace swg {

size_t shape_numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
    for (size_t d : shape_)
        if (d == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_str());
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_numel(shape_) != data_.size())
        throw std::invalid_argument("Tensor: shape " + shape_str() + " does not match " +
                                    std::to_string(data_.size()) + " values");
}

Tensor Tensor::identity(size_t n) {
    Tensor t({n, n});
    for (size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
}

void Tensor::fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

size_t Tensor::offset(std::initializer_list<size_t> idx) const {
    if (idx.size() != shape_.size())
        throw std::invalid_argument("Tensor::at: index rank mismatch for " + shape_str());
    size_t off = 0;
    size_t d = 0;
    for (size_t i : idx) {
        if (i >= shape_[d])
            throw std::out_of_range("Tensor::at: index out of range for " + shape_str());
        off = off * shape_[d] + i;
        ++d;
    }
    return off;
}

std::string Tensor::shape_str(const std::vector<size_t>& shape) {
    std::ostringstream ss;
    ss << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) ss << 'x';
        ss << shape[i];
    }
    ss << ']';
    return ss.str();
}

std::string Tensor::shape_str() const {
    return shape_str(shape_);
}

namespace {

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("tensor load: truncated header");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("tensor load: truncated header");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_tensor(std::ostream& os, const Tensor& t) {
    os.write("SWGT", 4);
    write_u32(os, static_cast<uint32_t>(t.rank()));
    for (size_t d : t.shape()) write_u64(os, d);
    std::vector<float> buf(t.numel());
    for (size_t i = 0; i < t.numel(); ++i) buf[i] = static_cast<float>(t[i]);
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 4));
    if (!os) throw std::runtime_error("tensor save: write failed");
}

Tensor load_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SWGT", 4) != 0)
        throw std::runtime_error("tensor load: bad magic (expected SWGT)");
    uint32_t rank = read_u32(is);
    if (rank > 16) throw std::runtime_error("tensor load: implausible rank " + std::to_string(rank));
    std::vector<size_t> shape(rank);
    for (auto& d : shape) d = static_cast<size_t>(read_u64(is));
    size_t n = shape_numel(shape);
    std::vector<float> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n * 4));
    if (!is) throw std::runtime_error("tensor load: truncated payload");
    std::vector<double> data(n);
    for (size_t i = 0; i < n; ++i) data[i] = buf[i];
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor_file(const std::string& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    save_tensor(f, t);
}

Tensor load_tensor_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    return load_tensor(f);
}

}  // namespace swg
