// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/devices.hpp"

namespace edgederm {

std::vector<DeviceBudget> device_catalog() {
  constexpr std::uint64_t kMHz = 1'000'000ull;
  return {
      {"Raspberry Pi 2 Model B", 1 * kGiB, 900 * kMHz},
      {"Raspberry Pi 3 Model B", 1 * kGiB, 1200 * kMHz},
      {"Raspberry Pi 4 Model B", 8 * kGiB, 2500 * kMHz},
      {"Xilinx PYNQ-Z1", 650 * kMiB, 525 * kMHz},
      {"UDOO BOLT V3", 32 * kGiB, 2300 * kMHz},
      {"Orange Pi 5", 8 * kGiB, 2400 * kMHz},
      {"Nvidia Jetson Nano", 4 * kGiB, 1430 * kMHz},
  };
}

std::optional<DeviceBudget> find_device(std::string_view name) {
  for (DeviceBudget& d : device_catalog()) {
    if (d.name == name) return d;
  }
  return std::nullopt;
}

}  // namespace edgederm
