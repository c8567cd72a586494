#pragma once

#include <complex>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include <fftw3.h>

#include "simlab/spectral_field.hpp"

namespace simlab {

namespace detail {
// FFTW's planner is not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace detail

/// Per-thread FFT workspace for one lattice size: a pair of c2c plans plus
/// scratch arrays reused by the nonlinearity.  Plans are created with
/// FFTW_ESTIMATE so planning never depends on runtime measurements and
/// results stay reproducible.
class TransformWorkspace {
  public:
    explicit TransformWorkspace(int n) : n_(n), scratch_(8), cscratch_(4) {
        buf_ = fftw_alloc_complex(static_cast<std::size_t>(n) * n);
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fwd_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~TransformWorkspace() {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    TransformWorkspace(const TransformWorkspace&) = delete;
    TransformWorkspace& operator=(const TransformWorkspace&) = delete;

    int n() const { return n_; }

    /// spectral coefficients (one component, n*n complex) -> physical values.
    /// The output is the real part of the synthesis; the imaginary part is
    /// dropped, so Hermitian-symmetric inputs round-trip as real fields.
    void to_physical(const Complex* spec, double* phys) {
        auto* b = reinterpret_cast<Complex*>(buf_);
        std::copy(spec, spec + static_cast<std::size_t>(n_) * n_, b);
        fftw_execute(bwd_);
        for (std::size_t m = 0; m < static_cast<std::size_t>(n_) * n_; ++m)
            phys[m] = b[m].real();
    }

    /// physical values -> spectral coefficients, normalised by 1/N^2 so that
    /// to_physical(to_spectral(f)) == f for band-limited data.
    void to_spectral(const double* phys, Complex* spec) {
        auto* b = reinterpret_cast<Complex*>(buf_);
        for (std::size_t m = 0; m < static_cast<std::size_t>(n_) * n_; ++m)
            b[m] = Complex(phys[m], 0.0);
        fftw_execute(fwd_);
        const double scale = 1.0 / (static_cast<double>(n_) * n_);
        for (std::size_t m = 0; m < static_cast<std::size_t>(n_) * n_; ++m)
            spec[m] = b[m] * scale;
    }

    // slots are fixed at construction so returned references stay valid
    std::vector<double>& scratch(std::size_t slot) {
        auto& v = scratch_.at(slot);
        v.resize(static_cast<std::size_t>(n_) * n_);
        return v;
    }

    std::vector<Complex>& spec_scratch(std::size_t slot) {
        auto& v = cscratch_.at(slot);
        v.resize(static_cast<std::size_t>(n_) * n_);
        return v;
    }

  private:
    int n_;
    fftw_complex* buf_;
    fftw_plan fwd_, bwd_;
    std::vector<std::vector<double>> scratch_;
    std::vector<std::vector<Complex>> cscratch_;
};

/// Thread-local workspace pool keyed by lattice size.
inline TransformWorkspace& workspace_for(const Lattice& lat) {
    thread_local std::unordered_map<int, std::unique_ptr<TransformWorkspace>> pool;
    auto& slot = pool[lat.n];
    if (!slot) slot = std::make_unique<TransformWorkspace>(lat.n);
    return *slot;
}

/// Physical-space samples of one component on the N x N grid x = (L/N) g.
inline std::vector<double> to_physical(const SpectralField& u, int component) {
    auto& ws = workspace_for(u.lattice);
    std::vector<double> phys(static_cast<std::size_t>(u.lattice.size()));
    ws.to_physical(&u.at(component, 0, 0), phys.data());
    return phys;
}

inline double max_physical_speed(const SpectralField& u) {
    const auto ux = to_physical(u, 0);
    const auto uy = to_physical(u, 1);
    double m = 0.0;
    for (std::size_t g = 0; g < ux.size(); ++g)
        m = std::max(m, std::sqrt(ux[g] * ux[g] + uy[g] * uy[g]));
    return m;
}

} // namespace simlab
