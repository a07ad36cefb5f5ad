#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "nmtprobe/autodiff.hpp"

namespace nmtprobe {

/// Named tensors plus free-form metadata (architecture descriptor, vocabs).
///
/// On-disk layout (UTF-8 text, '\n' line ends):
///
///     nmtprobe-checkpoint 1
///     meta <key> <value to end of line>        (zero or more, key-sorted)
///     tensor <name> <rows> <cols>              (zero or more, set order)
///     <cols values in %.17g, space-separated>  (one line per row)
///     end
///
/// Keys and names contain no whitespace; values contain no newline.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  ParameterSet params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text, const std::string& origin = "<memory>");

}  // namespace nmtprobe
