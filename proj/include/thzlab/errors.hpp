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

#ifndef thzlab_errors_H
#define thzlab_errors_H

#include <stdexcept>
#include <string>
#include <string_view>

namespace thzlab
{
    // Malformed input file (JSON syntax, wrong types, truncated binary container)
    class parse_error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Input parses but violates a documented invariant; message names the offending field
    class validation_error : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    // A pipeline stage was asked to run without the artifacts of the stage before it
    class missing_input_error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Estimation or fitting failed (degenerate data, singular system)
    class numeric_error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Non-fatal conditions (skipped records, regularized deconvolution) go through here.
    // The default handler prints to stderr; tests install their own.
    using warning_handler = void (*)(std::string_view);
    warning_handler set_warning_handler(warning_handler handler);
    void warn(std::string_view message);
}

#endif
