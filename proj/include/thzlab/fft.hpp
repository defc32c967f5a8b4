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

#ifndef thzlab_fft_H
#define thzlab_fft_H

#include <complex>
#include <span>
#include <vector>

namespace thzlab
{
    using cplx = std::complex<double>;
    using cvec = std::vector<cplx>;

    // Forward DFT X[m] = sum_k x[k] exp(-2 pi i m k / N)
    cvec fft(std::span<const cplx> x);

    // Inverse DFT including the 1/N factor, so ifft(fft(x)) == x
    cvec ifft(std::span<const cplx> x);
}

#endif
