#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "landseg/mask.hpp"

namespace landseg {

// Bijective mapping between the 7 land-cover classes and RGB colors.
// Index order is the fixed class assignment from mask.hpp.
struct ClassPalette {
  struct Entry {
    std::string name;
    std::array<std::uint8_t, 3> rgb{};
  };

  std::array<Entry, kNumClasses> entries;

  static ClassPalette defaults();

  // Text override, one `class_index name R G B` line per class.
  // '#' starts a comment; every class index must appear exactly once.
  static ClassPalette from_file(const std::filesystem::path& path);

  std::optional<int> class_of(std::uint8_t r, std::uint8_t g, std::uint8_t b) const;

  const Entry& entry(int cls) const { return entries[static_cast<std::size_t>(cls)]; }

  void validate() const;  // throws DataError on duplicate colors
};

}  // namespace landseg
