// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rfsolve {

/// Dense row-major tensor of 64-bit floats. The only numeric container in
/// the project; every module exchanges data through it.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (element_count(shape) != data.size())
            throw std::invalid_argument("tensor: shape does not match data length");
    }

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        std::size_t n = element_count(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }

    static Tensor vec(std::vector<double> d) {
        std::vector<std::size_t> s{d.size()};
        return Tensor(std::move(s), std::move(d));
    }

    std::size_t size() const { return data.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool all_finite() const;
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Elementwise helpers used by the solver recurrences.
Tensor add_scaled(const Tensor& a, double s, const Tensor& b);  // a + s*b
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
double mse(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);

/// Binary tensor file: 8-byte magic "RFTENSOR", u32 LE version (=1),
/// u32 LE rank, rank x u64 LE dims, then little-endian f64 payload.
/// Fixed widths and endianness so independent implementations interoperate.
void write_tensor(const Tensor& t, const std::string& path);
Tensor read_tensor(const std::string& path);

/// CSV: one row per (label, values) pair, floats at 17 significant digits
/// so a reader recovers the exact doubles. `metadata` rows are emitted
/// first as `# key=value` lines.
using CsvRow = std::pair<std::string, std::vector<double>>;
void write_csv(const std::vector<CsvRow>& rows, const std::string& path);
void write_csv(const std::vector<std::pair<std::string, std::string>>& metadata,
               const std::vector<CsvRow>& rows, const std::string& path);

std::string format_double(double v);  // %.17g

}  // namespace rfsolve
