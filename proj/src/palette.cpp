#include "landseg/palette.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "landseg/error.hpp"

namespace landseg {

ClassPalette ClassPalette::defaults() {
  ClassPalette p;
  p.entries = {{
      {"urban", {0, 255, 255}},
      {"agriculture", {255, 255, 0}},
      {"rangeland", {255, 0, 255}},
      {"forest", {0, 255, 0}},
      {"water", {0, 0, 255}},
      {"barren", {255, 255, 255}},
      {"unknown", {0, 0, 0}},
  }};
  return p;
}

ClassPalette ClassPalette::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open palette file " + path.string());

  ClassPalette p;
  std::set<int> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    int cls = -1;
    std::string name;
    int r = -1, g = -1, b = -1;
    if (!(fields >> cls)) continue;  // blank or comment-only line
    if (!(fields >> name >> r >> g >> b)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected `class_index name R G B`");
    }
    if (cls < 0 || cls >= kNumClasses) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": class index " +
                      std::to_string(cls) + " outside 0.." + std::to_string(kNumClasses - 1));
    }
    if (r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": RGB outside 0..255");
    }
    if (!seen.insert(cls).second) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate class index " +
                      std::to_string(cls));
    }
    p.entries[static_cast<std::size_t>(cls)] = {
        name,
        {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)}};
  }
  if (static_cast<int>(seen.size()) != kNumClasses) {
    throw DataError(path.string() + ": palette defines " + std::to_string(seen.size()) + " of " +
                    std::to_string(kNumClasses) + " classes");
  }
  p.validate();
  return p;
}

std::optional<int> ClassPalette::class_of(std::uint8_t r, std::uint8_t g, std::uint8_t b) const {
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& rgb = entries[static_cast<std::size_t>(c)].rgb;
    if (rgb[0] == r && rgb[1] == g && rgb[2] == b) return c;
  }
  return std::nullopt;
}

void ClassPalette::validate() const {
  for (int a = 0; a < kNumClasses; ++a) {
    for (int b = a + 1; b < kNumClasses; ++b) {
      if (entries[static_cast<std::size_t>(a)].rgb == entries[static_cast<std::size_t>(b)].rgb) {
        throw DataError("palette colors for `" + entries[static_cast<std::size_t>(a)].name +
                        "` and `" + entries[static_cast<std::size_t>(b)].name +
                        "` collide; the mapping must be bijective");
      }
    }
  }
}

}  // namespace landseg
