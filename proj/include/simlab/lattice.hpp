#pragma once

#include <cmath>
#include <stdexcept>

namespace simlab {

/// Truncated Fourier lattice for the periodic box [0,L)^2.
///
/// Coefficients live on an N x N array of integer mode pairs
/// m = (m1, m2) with m_i in [-N/2, N/2).  Array index i in [0,N) maps to
/// the frequency m = i for i < N/2 and m = i - N otherwise (the usual DFT
/// bin order), so bin i holds the wavevector k = (2*pi/L) * m.  This index
/// map is also the layout contract of the SPF1 snapshot format.
struct Lattice {
    int n = 0;        // modes per direction, even, >= 8
    double box = 0.0; // box side length L

    int size() const { return n * n; }

    // bin index -> signed integer frequency
    int freq(int i) const { return i < n / 2 ? i : i - n; }
    // signed integer frequency -> bin index
    int bin(int m) const { return m >= 0 ? m : m + n; }

    double dk() const { return 2.0 * M_PI / box; }
    double k1(int i) const { return dk() * freq(i); }
    double k2(int j) const { return dk() * freq(j); }
    // |k|^2 for bin pair (i, j)
    double k_sq(int i, int j) const {
        const double a = k1(i), b = k2(j);
        return a * a + b * b;
    }
    // Sobolev weight (1 + |k|^2)^s
    double weight(int i, int j, double s) const {
        return std::pow(1.0 + k_sq(i, j), s);
    }

    bool operator==(const Lattice&) const = default;
};

inline Lattice make_lattice(int n, double box) {
    if (n < 8) throw std::invalid_argument("make_lattice: N must be >= 8");
    if (n % 2 != 0) throw std::invalid_argument("make_lattice: N must be even");
    if (!(box > 0.0)) throw std::invalid_argument("make_lattice: L must be > 0");
    return Lattice{n, box};
}

} // namespace simlab
