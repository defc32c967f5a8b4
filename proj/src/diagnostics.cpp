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

#include "thzlab/errors.hpp"

#include <atomic>
#include <iostream>

namespace
{
    void default_handler(std::string_view message)
    {
        std::cerr << "warning: " << message << '\n';
    }

    std::atomic<thzlab::warning_handler> current_handler{&default_handler};
}

thzlab::warning_handler thzlab::set_warning_handler(warning_handler handler)
{
    return current_handler.exchange(handler ? handler : &default_handler);
}

void thzlab::warn(std::string_view message)
{
    current_handler.load()(message);
}
