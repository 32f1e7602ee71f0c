// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edgederm {

struct DeviceBudget {
  std::string name;
  std::uint64_t memory_bytes = 0;
  std::uint64_t clock_hz = 0;
};

inline constexpr std::uint64_t kMiB = 1024ull * 1024ull;
inline constexpr std::uint64_t kGiB = 1024ull * kMiB;

/// Constrained boards considered for deployment. Boards sold in several
/// memory sizes carry their headline size: 8 GiB for the Pi 4 and the
/// Orange Pi 5, 32 GiB for the BOLT.
std::vector<DeviceBudget> device_catalog();

std::optional<DeviceBudget> find_device(std::string_view name);

}  // namespace edgederm
