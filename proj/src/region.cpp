#include "garment/region.hpp"

namespace garment {

std::string_view to_string(Region r) {
  switch (r) {
    case Region::Torso: return "torso";
    case Region::Waist: return "waist";
    case Region::UpperLimbL: return "upper_limb_l";
    case Region::UpperLimbR: return "upper_limb_r";
    case Region::LowerLimbL: return "lower_limb_l";
    case Region::LowerLimbR: return "lower_limb_r";
    case Region::UpperLegL: return "upper_leg_l";
    case Region::UpperLegR: return "upper_leg_r";
    case Region::LowerLegL: return "lower_leg_l";
    case Region::LowerLegR: return "lower_leg_r";
  }
  return "?";
}

std::string_view to_string(RegionClass c) {
  switch (c) {
    case RegionClass::Torso: return "torso";
    case RegionClass::Waist: return "waist";
    case RegionClass::UpperLimbs: return "upper_limbs";
    case RegionClass::LowerLimbs: return "lower_limbs";
    case RegionClass::UpperLegs: return "upper_legs";
    case RegionClass::LowerLegs: return "lower_legs";
  }
  return "?";
}

}  // namespace garment
