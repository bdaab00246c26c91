#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "agex/core/hash.hpp"

namespace agex {

// Synthetic patient identity: eight uniform traits fixed by the seed.
struct PhantomIdentity {
  std::uint64_t identity_seed = 0;
  std::array<double, 8> traits{};

  static PhantomIdentity from_seed(std::uint64_t seed) {
    PhantomIdentity id;
    id.identity_seed = seed;
    for (std::size_t i = 0; i < id.traits.size(); ++i) {
      id.traits[i] = static_cast<double>(derive_seed(seed, i + 1) >> 11) * 0x1.0p-53;
    }
    return id;
  }

  // All traits at 0.5; the "average" patient.
  static PhantomIdentity neutral() {
    PhantomIdentity id;
    id.traits.fill(0.5);
    return id;
  }

  static PhantomIdentity from_patient_id(std::string_view patient_id) {
    return from_seed(fnv1a64(patient_id));
  }
};

}  // namespace agex
