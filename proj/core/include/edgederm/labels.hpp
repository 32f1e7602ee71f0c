// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edgederm {

inline constexpr std::size_t kNumClasses = 7;

// Class id == index. The order is part of the bundle format.
inline constexpr std::array<std::string_view, kNumClasses> kClassLabels{
    "benign keratosis",     "melanocytic nevus", "dermatofibroma",    "melanoma",
    "vascular lesion",      "basal cell carcinoma", "actinic keratosis",
};

// HAM10000 `dx` codes in class-id order.
inline constexpr std::array<std::string_view, kNumClasses> kDiagnosisCodes{
    "bkl", "nv", "df", "mel", "vasc", "bcc", "akiec",
};

std::vector<std::string> default_labels();
std::optional<int> class_from_code(std::string_view code);

}  // namespace edgederm
