#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace clbforge::testing {

struct GoldenVector {
  std::vector<std::uint8_t> input;
  std::string algorithm;
  std::uint32_t output = 0;
};

inline std::vector<std::uint8_t> parse_hex_bytes(const std::string& hex) {
  std::vector<std::uint8_t> out;
  if (hex == "-") return out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
    out.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
  return out;
}

inline std::vector<GoldenVector> load_golden_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<GoldenVector> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string input, algo, output;
    ls >> input >> algo >> output;
    out.push_back({parse_hex_bytes(input), algo, static_cast<std::uint32_t>(std::stoul(output, nullptr, 16))});
  }
  return out;
}

inline std::string golden_vectors_path() { return std::string(CLBFORGE_TEST_DATA_DIR) + "/golden_vectors.txt"; }

}  // namespace clbforge::testing
