// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include <string>
#include <string_view>

namespace cama {

/// Porter (1980) suffix-stripping stemmer for lowercase ASCII words.
/// Words of length <= 2 and words containing non [a-z] bytes are returned as is.
std::string porter_stem(std::string_view word);

} // namespace cama
