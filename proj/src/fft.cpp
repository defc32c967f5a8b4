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

#include "thzlab/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace
{
    // Planning is not thread-safe in FFTW; execution with the new-array interface is.
    class plan_cache
    {
    public:
        ~plan_cache()
        {
            for (auto &[key, plan] : plans_)
                fftw_destroy_plan(plan);
        }

        fftw_plan get(std::size_t n, int sign)
        {
            std::lock_guard lock(mutex_);
            auto it = plans_.find({n, sign});
            if (it != plans_.end())
                return it->second;
            thzlab::cvec a(n), b(n);
            fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n),
                                           reinterpret_cast<fftw_complex *>(a.data()),
                                           reinterpret_cast<fftw_complex *>(b.data()),
                                           sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
            plans_.emplace(std::make_pair(n, sign), p);
            return p;
        }

    private:
        std::mutex mutex_;
        std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
    };

    plan_cache &cache()
    {
        static plan_cache c;
        return c;
    }

    thzlab::cvec transform(std::span<const thzlab::cplx> x, int sign)
    {
        thzlab::cvec in(x.begin(), x.end()), out(x.size());
        if (x.empty())
            return out;
        fftw_execute_dft(cache().get(x.size(), sign),
                         reinterpret_cast<fftw_complex *>(in.data()),
                         reinterpret_cast<fftw_complex *>(out.data()));
        return out;
    }
}

thzlab::cvec thzlab::fft(std::span<const cplx> x)
{
    return transform(x, FFTW_FORWARD);
}

thzlab::cvec thzlab::ifft(std::span<const cplx> x)
{
    cvec out = transform(x, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(x.size());
    for (auto &v : out)
        v *= scale;
    return out;
}
