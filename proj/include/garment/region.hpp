#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace garment {

/// Template regions, split by side for skinning.
enum class Region : std::uint8_t {
  Torso,
  Waist,
  UpperLimbL,
  UpperLimbR,
  LowerLimbL,
  LowerLimbR,
  UpperLegL,
  UpperLegR,
  LowerLegL,
  LowerLegR,
};

inline constexpr int kRegionCount = 10;

/// The six side-agnostic classes activation operates on.
enum class RegionClass : std::uint8_t { Torso, Waist, UpperLimbs, LowerLimbs, UpperLegs, LowerLegs };

inline constexpr int kRegionClassCount = 6;

constexpr RegionClass region_class(Region r) {
  switch (r) {
    case Region::Torso: return RegionClass::Torso;
    case Region::Waist: return RegionClass::Waist;
    case Region::UpperLimbL:
    case Region::UpperLimbR: return RegionClass::UpperLimbs;
    case Region::LowerLimbL:
    case Region::LowerLimbR: return RegionClass::LowerLimbs;
    case Region::UpperLegL:
    case Region::UpperLegR: return RegionClass::UpperLegs;
    case Region::LowerLegL:
    case Region::LowerLegR: return RegionClass::LowerLegs;
  }
  return RegionClass::Torso;
}

std::string_view to_string(Region r);
std::string_view to_string(RegionClass c);

}  // namespace garment
