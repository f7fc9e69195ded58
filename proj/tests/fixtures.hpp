#pragma once

#include <string>
#include <vector>

#include "dforge/scene.hpp"

namespace fixtures {

inline dforge::Object object(const std::string& size, const std::string& color, const std::string& material,
                             const std::string& shape, double x, double y) {
  using dforge::Attribute;
  dforge::Object o;
  o.attributes[static_cast<std::size_t>(Attribute::size)] = *dforge::parse_value(Attribute::size, size);
  o.attributes[static_cast<std::size_t>(Attribute::color)] = *dforge::parse_value(Attribute::color, color);
  o.attributes[static_cast<std::size_t>(Attribute::material)] = *dforge::parse_value(Attribute::material, material);
  o.attributes[static_cast<std::size_t>(Attribute::shape)] = *dforge::parse_value(Attribute::shape, shape);
  o.position = {x, y, 0.35};
  return o;
}

// A green cylinder directly in front of a gray cylinder, among other things.
//   0 gray cylinder, 1 green cylinder (in front of 0), 2 red cube, 3 blue sphere
inline dforge::Scene cylinder_pair_scene() {
  return dforge::make_scene("cylinders", {object("large", "gray", "metal", "cylinder", 0.0, 0.0),
                                          object("small", "green", "rubber", "cylinder", 0.2, 1.0),
                                          object("large", "red", "rubber", "cube", -2.0, -1.5),
                                          object("small", "blue", "metal", "sphere", 2.5, 2.2)});
}

inline dforge::Scene four_cylinders() {
  return dforge::make_scene("cyl4", {object("large", "gray", "metal", "cylinder", -2.0, 0.0),
                                     object("small", "red", "rubber", "cylinder", -0.5, 1.0),
                                     object("large", "blue", "rubber", "cylinder", 1.0, -1.0),
                                     object("small", "cyan", "metal", "cylinder", 2.5, 0.5)});
}

inline dforge::Scene six_objects() {
  return dforge::make_scene("six", {object("large", "gray", "metal", "cylinder", -2.5, -2.0),
                                    object("small", "red", "rubber", "cube", -1.2, 1.3),
                                    object("large", "blue", "rubber", "sphere", 0.1, -0.6),
                                    object("small", "cyan", "metal", "cube", 1.4, 2.4),
                                    object("large", "yellow", "metal", "sphere", 2.3, -1.7),
                                    object("small", "purple", "rubber", "cylinder", -0.4, 2.8)});
}

}  // namespace fixtures
