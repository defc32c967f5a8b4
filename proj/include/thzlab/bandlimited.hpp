// SPDX-License-Identifier: Apache-2.0
//
// thzlab - synthetic correlation-sounder laboratory for THz channel studies
// Copyright (C) 2026 The thzlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef thzlab_bandlimited_H
#define thzlab_bandlimited_H

// Band-limited delay-domain helpers. A CIR with K bins is treated as one period of a
// signal limited to the sounder bandwidth: a path at fractional delay tau (in bins)
// contributes gain * D(k - tau) where D is the periodic sinc (Dirichlet) kernel whose
// spectrum is flat over the band. For even K the Nyquist bin is left empty: a fractional
// shift cannot be represented there, so D(0) = (K - 1) / K and component amplitudes are
// reported as the gain g rather than the peak sample.

#include "thzlab/fft.hpp"

#include <cstddef>
#include <span>

namespace thzlab
{
    // Signed frequency index of DFT bin m for length K; the Nyquist bin maps to +K/2
    double frequency_index(std::size_t m, std::size_t K);

    // Periodic sinc kernel over the occupied bins; D(0) = 1 for odd K, (K - 1) / K for even K
    double dirichlet(double x, std::size_t K);

    // Adds gain * exp(-2 pi i f tau / K) to every bin of spectrum H (tau in bins)
    void add_delayed_tone(cvec &H, cplx gain, double delay_bins);

    // Circular band-limited shift by shift_bins (positive = later); clears the Nyquist bin
    cvec fractional_shift(std::span<const cplx> x, double shift_bins);

    // Exact band-limited reconstruction of a CIR at fractional delays. Holds the DFT of
    // the samples; evaluation costs one pass over the bins.
    class bandlimited_signal
    {
    public:
        explicit bandlimited_signal(std::span<const cplx> samples);

        std::size_t size() const { return spectrum_.size(); }

        cplx at(double t) const;

        // Value and first two derivatives with respect to t
        void at(double t, cplx &value, cplx &d1, cplx &d2) const;

        // Adds / removes amplitude * D(k - delay_bins)
        void add(cplx amplitude, double delay_bins);
        void subtract(cplx amplitude, double delay_bins) { add(-amplitude, delay_bins); }

        // Time-domain samples of the current signal
        const cvec &samples() const;

    private:
        cvec spectrum_;
        mutable cvec samples_;
        mutable bool samples_valid_ = false;
    };

    // Band-limited reconstruction of x at fractional position t (bins)
    cplx interpolate_at(std::span<const cplx> x, double t);

    struct peak_estimate
    {
        double delay_bins = 0.0;
        cplx amplitude;
        double parabolic_delay_bins = 0.0; // 3-point log-power vertex before polishing
    };

    // Sub-bin refinement of the local maximum at bin k: 3-point parabola on log-power,
    // then Newton polish of |x(t)|^2 on the band-limited reconstruction. The amplitude
    // is the component gain g of g D(t - tau).
    peak_estimate refine_peak(const bandlimited_signal &x, std::size_t k);
    peak_estimate refine_peak(std::span<const cplx> x, std::size_t k);

    // x[k] -= amplitude * D(k - delay_bins) for every bin
    void subtract_component(std::span<cplx> x, cplx amplitude, double delay_bins);

    // Mean of |x[k]|^2
    double mean_power(std::span<const cplx> x);
}

#endif
