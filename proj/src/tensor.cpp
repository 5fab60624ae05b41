// SPDX-License-Identifier: Apache-2.0

#include "rfsolve/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace rfsolve {

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor add_scaled(const Tensor& a, double s, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add_scaled: shape mismatch");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += s * b.data[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) { return add_scaled(a, -1.0, b); }

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (double& v : out.data) v *= s;
    return out;
}

double mse(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
    if (a.size() == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double l2_norm(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v * v;
    return std::sqrt(acc);
}

namespace {

constexpr char kMagic[8] = {'R', 'F', 'T', 'E', 'N', 'S', 'O', 'R'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

bool get_u32(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return true;
}

bool get_u64(std::istream& is, std::uint64_t& v) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
}

}  // namespace

void write_tensor(const Tensor& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_tensor: cannot open " + path);
    os.write(kMagic, 8);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) put_u64(os, d);
    static_assert(std::endian::native == std::endian::little,
                  "payload write assumes little-endian host");
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!os) throw std::runtime_error("write_tensor: I/O failure on " + path);
}

Tensor read_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_tensor: cannot open " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("read_tensor: not a tensor file: " + path);
    std::uint32_t version = 0, rank = 0;
    if (!get_u32(is, version) || version != kVersion)
        throw std::runtime_error("read_tensor: unsupported version in " + path);
    if (!get_u32(is, rank)) throw std::runtime_error("read_tensor: corrupt file: " + path);
    std::vector<std::size_t> shape(rank);
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint64_t d = 0;
        if (!get_u64(is, d) || d == 0)
            throw std::runtime_error("read_tensor: corrupt file: " + path);
        shape[i] = static_cast<std::size_t>(d);
        count *= d;
    }
    std::vector<double> data(count);
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(count * sizeof(double))))
        throw std::runtime_error("read_tensor: corrupt file: " + path);
    Tensor t(std::move(shape), std::move(data));
    if (!t.all_finite())
        throw std::runtime_error("read_tensor: invalid data (non-finite) in " + path);
    return t;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::vector<CsvRow>& rows, const std::string& path) {
    write_csv({}, rows, path);
}

void write_csv(const std::vector<std::pair<std::string, std::string>>& metadata,
               const std::vector<CsvRow>& rows, const std::string& path) {
    if (!rows.empty()) {
        std::size_t n = rows.front().second.size();
        for (const auto& r : rows)
            if (r.second.size() != n)
                throw std::invalid_argument("write_csv: ragged rows");
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_csv: cannot open " + path);
    for (const auto& [k, v] : metadata) os << "# " << k << "=" << v << "\n";
    for (const auto& [label, values] : rows) {
        os << label;
        for (double v : values) os << "," << format_double(v);
        os << "\n";
    }
    if (!os) throw std::runtime_error("write_csv: I/O failure on " + path);
}

}  // namespace rfsolve
