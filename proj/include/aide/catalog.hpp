#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aide/affordance_space.hpp"

namespace aide::catalog {

/// The 19 rated traits, in vector order.
inline constexpr std::array<std::string_view, 19> kDimensionNames = {
    "color complexity", "glossiness",         "shape design",        "symmetry",
    "surface smoothness", "material",         "handle design",       "capacity",
    "opening size",     "stability",          "transparency",        "material flexibility",
    "volume",           "height-to-width ratio", "durability",       "maintenance difficulty",
    "safety",           "ease of use",        "portability"};

struct AffordanceClass {
  std::string_view name;
  std::array<double, 19> centroid;
  std::vector<std::string_view> tools;
  std::vector<std::string_view> containers;  // where such tools are usually stored
  std::vector<std::string_view> phrases;     // ambiguous instruction phrasings
};

/// Tool classes. Centroids are pairwise at least 16 apart and at least 12
/// from the neutral all-5 vector.
inline const std::vector<AffordanceClass>& tool_classes() {
  static const std::vector<AffordanceClass> classes = {
      {"drinking",
       {3.0, 7.5, 0.0, 4.0, 9.5, 7.5, 0.0, 2.5, 4.0, 9.5, 1.5, 8.5, 5.0, 9.0, 10.0, 10.0, 2.0, 9.5, 0.5},
       {"cup", "mug", "glass", "bottle", "coke"},
       {"fridge", "cabinet"},
       {"I am thirsty", "my throat feels dry", "I need something to sip", "I want a drink",
        "something cold to drink would be nice", "I could use a beverage", "my mouth is parched",
        "pour me something", "I need to stay hydrated", "I want to sip some water"}},
      {"cleaning",
       {5.0, 7.0, 5.5, 5.5, 5.0, 9.5, 6.0, 8.0, 6.5, 10.0, 6.0, 0.5, 7.5, 10.0, 5.0, 8.5, 2.0, 7.5, 8.0},
       {"brush", "sponge", "duster", "broom"},
       {"cabinet", "closet"},
       {"I want to clean the dust", "the table is dusty", "there are crumbs everywhere",
        "this shelf looks dirty", "I want to tidy up the desk", "the floor needs sweeping",
        "wipe away this mess", "the keyboard is full of dust", "I spilled flour here",
        "the window sill is grimy"}},
      {"striking",
       {8.0, 3.5, 6.5, 2.5, 0.5, 1.5, 7.0, 0.0, 9.5, 4.0, 2.5, 9.5, 3.0, 7.5, 10.0, 4.0, 0.5, 8.5, 5.0},
       {"hammer", "mallet", "nutcracker"},
       {"toolbox", "drawer"},
       {"I want to crack walnuts", "this nail is sticking out", "I need to pound this flat",
        "the tent peg will not go in", "break this shell open", "knock this pin into place",
        "the picture hook needs fixing", "I want to crush some ice", "tap this joint together",
        "flatten this dent"}},
      {"sealing",
       {5.0, 8.0, 6.5, 0.0, 5.0, 1.5, 9.5, 5.0, 2.0, 3.0, 5.5, 2.5, 0.5, 0.0, 6.5, 5.0, 10.0, 10.0, 1.5},
       {"tape", "glue", "stapler"},
       {"drawer", "toolbox"},
       {"I want to close up delivery boxes tightly", "this envelope will not stay shut",
        "the torn page needs mending", "seal this package", "stick these papers together",
        "the poster keeps falling down", "keep this bag closed", "fix the ripped box flap",
        "attach this note to the wall", "bind these sheets"}},
      {"support",
       {9.0, 4.5, 2.0, 2.5, 7.0, 2.5, 0.5, 0.5, 0.5, 3.5, 3.5, 4.0, 8.0, 8.5, 10.0, 3.5, 9.5, 6.5, 1.5},
       {"pillow", "cushion"},
       {"closet", "cabinet"},
       {"I want to support my waist while sitting", "my back hurts in this chair",
        "this seat is too hard", "I need something to lean on", "my neck is stiff",
        "I want to rest my head", "prop up my legs", "the sofa feels uncomfortable",
        "I need lumbar support", "make this chair softer"}},
      {"cutting",
       {4.5, 10.0, 8.5, 0.0, 5.5, 1.5, 9.0, 4.0, 3.0, 1.5, 9.0, 1.0, 9.0, 8.0, 2.5, 1.0, 1.5, 8.5, 8.0},
       {"knife", "scissors", "cutter"},
       {"drawer", "toolbox"},
       {"I want to open this parcel", "slice the bread", "this string is too long",
        "trim these flowers", "cut this paper in half", "the label tag is annoying",
        "I need to portion the cake", "open the plastic packaging", "shorten this ribbon",
        "peel this apple"}},
      {"heating",
       {1.5, 10.0, 2.0, 9.5, 2.5, 6.5, 8.0, 2.5, 9.0, 0.5, 0.5, 9.5, 1.0, 10.0, 4.5, 3.5, 5.5, 7.5, 6.5},
       {"kettle", "lighter", "heater"},
       {"cabinet", "closet"},
       {"I want some hot tea", "light the candles", "my hands are freezing",
        "warm up this room", "boil some water", "the soup has gone cold", "I feel chilly",
        "make a hot drink", "melt this wax", "start the fireplace"}},
      {"writing",
       {7.0, 8.5, 7.5, 1.5, 8.5, 3.5, 4.5, 0.0, 6.0, 8.0, 4.0, 7.0, 0.0, 1.0, 9.5, 3.0, 9.0, 3.5, 9.5},
       {"pen", "pencil", "marker"},
       {"drawer", "cabinet"},
       {"I need to jot this down", "sign this form", "label these boxes", "take a quick note",
        "write a shopping list", "mark the date on the calendar", "sketch this idea",
        "fill in the crossword", "address this envelope", "underline the key points"}},
  };
  return classes;
}

/// Storage furniture. Each is its own class so containers are told apart.
inline const std::vector<AffordanceClass>& container_classes() {
  static const std::vector<AffordanceClass> classes = {
      {"fridge",
       {8.5, 9.5, 8.0, 9.5, 6.5, 0.5, 0.5, 10.0, 1.5, 0.0, 6.0, 6.5, 7.0, 5.5, 2.5, 1.5, 1.0, 1.5, 4.5},
       {"fridge"}, {}, {}},
      {"drawer",
       {0.5, 7.5, 3.0, 8.5, 1.5, 1.5, 4.0, 3.0, 9.0, 3.5, 4.0, 9.5, 0.0, 1.0, 3.5, 10.0, 9.0, 4.0, 0.0},
       {"drawer"}, {}, {}},
      {"cabinet",
       {5.5, 6.0, 7.0, 9.0, 10.0, 0.5, 6.5, 6.5, 8.0, 5.5, 0.5, 1.5, 3.0, 9.5, 6.5, 0.0, 4.5, 3.5, 9.0},
       {"cabinet"}, {}, {}},
      {"toolbox",
       {3.5, 4.5, 3.5, 9.5, 6.5, 4.0, 10.0, 2.0, 2.5, 7.0, 9.0, 5.0, 0.5, 8.0, 0.0, 7.0, 6.5, 3.5, 5.0},
       {"toolbox"}, {}, {}},
      {"closet",
       {6.0, 2.0, 9.5, 9.0, 1.5, 9.5, 6.5, 6.0, 5.0, 8.5, 10.0, 4.0, 10.0, 3.0, 7.0, 0.0, 6.0, 8.0, 5.5},
       {"closet"}, {}, {}},
  };
  return classes;
}

inline const AffordanceClass* find_class(std::string_view name) {
  for (const auto& c : tool_classes())
    if (c.name == name) return &c;
  for (const auto& c : container_classes())
    if (c.name == name) return &c;
  return nullptr;
}

/// Affordance class owning `label`, or nullopt for unknown labels.
inline std::optional<std::string> class_of_label(std::string_view label) {
  for (const auto& c : tool_classes())
    for (auto t : c.tools)
      if (t == label) return std::string(c.name);
  for (const auto& c : container_classes())
    if (c.name == label) return std::string(c.name);
  return std::nullopt;
}

inline bool is_container_label(std::string_view label) {
  for (const auto& c : container_classes())
    if (c.name == label) return true;
  return false;
}

/// Class centroid stretched or truncated to `dims`; dimensions past 19 repeat
/// the pattern so non-default X values still get separated classes.
inline AffordanceVector centroid_of(const AffordanceClass& cls, std::size_t dims) {
  std::vector<double> v(dims);
  for (std::size_t i = 0; i < dims; ++i) v[i] = cls.centroid[i % cls.centroid.size()];
  return AffordanceVector(std::move(v));
}

}  // namespace aide::catalog
