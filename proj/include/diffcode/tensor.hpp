#pragma once

#include <Eigen/Core>

#include <cstring>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "diffcode/common.hpp"
#include "diffcode/random.hpp"

namespace diffcode {

template <class Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index shape_numel(const std::vector<Index>& shape) {
    Index n = 1;
    for (Index e : shape) {
        check_shape(e >= 0, "negative extent");
        n *= e;
    }
    return n;
}

inline std::string shape_str(const std::vector<Index>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

// Dense row-major N-d array over a flat Eigen buffer. Rank 0 is a scalar
// (numel 1). The value type for every feature map, latent, image and
// parameter in the library.
template <class Scalar>
class TensorT {
  public:
    TensorT() : shape_{}, data_(1) { data_.setZero(); }

    explicit TensorT(std::vector<Index> shape) : shape_(std::move(shape)), data_(shape_numel(shape_)) {
        data_.setZero();
    }

    TensorT(std::vector<Index> shape, ArrayX<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape(shape_numel(shape_) == data_.size(), "tensor data size does not match shape");
    }

    static TensorT zeros(std::vector<Index> shape) { return TensorT(std::move(shape)); }

    static TensorT full(std::vector<Index> shape, Scalar v) {
        TensorT t(std::move(shape));
        t.data_.setConstant(v);
        return t;
    }

    static TensorT ones(std::vector<Index> shape) { return full(std::move(shape), Scalar(1)); }

    static TensorT scalar(Scalar v) {
        TensorT t;
        t.data_[0] = v;
        return t;
    }

    static TensorT from_values(std::vector<Index> shape, std::initializer_list<Scalar> vals) {
        TensorT t(std::move(shape));
        check_shape(static_cast<Index>(vals.size()) == t.numel(), "from_values: count mismatch");
        Index i = 0;
        for (Scalar v : vals) t.data_[i++] = v;
        return t;
    }

    static TensorT random_normal(std::vector<Index> shape, Rng& rng, double scale = 1.0) {
        TensorT t(std::move(shape));
        for (Index i = 0; i < t.numel(); ++i) t.data_[i] = static_cast<Scalar>(scale * rng.normal());
        return t;
    }

    static TensorT random_uniform(std::vector<Index> shape, Rng& rng, double lo, double hi) {
        TensorT t(std::move(shape));
        for (Index i = 0; i < t.numel(); ++i) t.data_[i] = static_cast<Scalar>(rng.uniform(lo, hi));
        return t;
    }

    const std::vector<Index>& shape() const { return shape_; }
    Index rank() const { return static_cast<Index>(shape_.size()); }
    Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
    Index numel() const { return data_.size(); }

    ArrayX<Scalar>& data() { return data_; }
    const ArrayX<Scalar>& data() const { return data_; }

    Scalar& operator[](Index i) { return data_[i]; }
    Scalar operator[](Index i) const { return data_[i]; }

    Scalar& at(std::initializer_list<Index> idx) { return data_[flat_index(idx)]; }
    Scalar at(std::initializer_list<Index> idx) const { return data_[flat_index(idx)]; }

    Scalar value() const {
        check_shape(numel() == 1, "value(): tensor is not a scalar");
        return data_[0];
    }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    bool all_finite() const { return data_.isFinite().all(); }

    TensorT reshaped(std::vector<Index> shape) const {
        check_shape(shape_numel(shape) == numel(), "reshape: numel mismatch");
        return TensorT(std::move(shape), data_);
    }

    template <class Other>
    TensorT<Other> cast() const {
        TensorT<Other> out(shape_);
        out.data() = data_.template cast<Other>();
        return out;
    }

    bool bit_equal(const TensorT& o) const {
        if (shape_ != o.shape_) return false;
        return std::memcmp(data_.data(), o.data_.data(), sizeof(Scalar) * static_cast<std::size_t>(numel())) == 0;
    }

  private:
    Index flat_index(std::initializer_list<Index> idx) const {
        check_shape(static_cast<Index>(idx.size()) == rank(), "index rank mismatch");
        Index flat = 0;
        std::size_t k = 0;
        for (Index i : idx) {
            const Index extent = shape_[k];
            check_shape(i >= 0 && i < extent, "index out of range");
            flat = flat * extent + i;
            ++k;
        }
        return flat;
    }

    std::vector<Index> shape_;
    ArrayX<Scalar> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// ---------------------------------------------------------------------------
// Portable tensor file: "DFT1" magic, u32 LE rank, rank x u32 LE extents,
// raw little-endian float32 payload. Round-trips bit-exactly for float data.
// ---------------------------------------------------------------------------

namespace io {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw Error("unexpected end of file reading u32");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    write_u32(os, static_cast<std::uint32_t>(v & 0xffffffffULL));
    write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint64_t read_u64(std::istream& is) {
    const std::uint64_t lo = read_u32(is);
    const std::uint64_t hi = read_u32(is);
    return lo | (hi << 32);
}

inline void write_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

inline float read_f32(std::istream& is) {
    const std::uint32_t bits = read_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace io

template <class Scalar>
void save_tensor(std::ostream& os, const TensorT<Scalar>& t) {
    os.write("DFT1", 4);
    io::write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (Index i = 0; i < t.rank(); ++i) io::write_u32(os, static_cast<std::uint32_t>(t.dim(i)));
    for (Index i = 0; i < t.numel(); ++i) io::write_f32(os, static_cast<float>(t[i]));
}

template <class Scalar>
void save_tensor(const std::string& path, const TensorT<Scalar>& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for write: " + path);
    save_tensor(f, t);
    if (!f) throw Error("write failed: " + path);
}

template <class Scalar = float>
TensorT<Scalar> load_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DFT1", 4) != 0) throw Error("bad tensor file magic (want DFT1)");
    const std::uint32_t rank = io::read_u32(is);
    check(rank <= 8, "tensor rank too large");
    std::vector<Index> shape(rank);
    for (auto& e : shape) e = static_cast<Index>(io::read_u32(is));
    TensorT<Scalar> t(shape);
    for (Index i = 0; i < t.numel(); ++i) t[i] = static_cast<Scalar>(io::read_f32(is));
    if (!is) throw Error("unexpected end of tensor file");
    return t;
}

template <class Scalar = float>
TensorT<Scalar> load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for read: " + path);
    return load_tensor<Scalar>(f);
}

}  // namespace diffcode
