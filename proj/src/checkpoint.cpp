#include "nmtprobe/checkpoint.hpp"

#include <cstdlib>

#include "nmtprobe/io.hpp"

namespace nmtprobe {

namespace {
constexpr const char* kMagic = "nmtprobe-checkpoint 1";
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out = kMagic;
  out += '\n';
  for (const auto& [key, value] : ckpt.meta) {
    if (key.find_first_of(" \t\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw ValueError("checkpoint meta '" + key + "' is not single-line");
    }
    out += "meta " + key + " " + value + "\n";
  }
  for (const auto& p : ckpt.params) {
    out += "tensor " + p.name + " " + std::to_string(p.value.rows()) + " " + std::to_string(p.value.cols()) + "\n";
    for (Index r = 0; r < p.value.rows(); ++r) {
      for (Index c = 0; c < p.value.cols(); ++c) {
        if (c) out += ' ';
        out += format_exact(p.value(r, c));
      }
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

Checkpoint parse_checkpoint(const std::string& text, const std::string& origin) {
  const auto lines = split(text, '\n');
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) { throw FormatError(origin, i + 1, msg); };
  if (lines.empty() || lines[0] != kMagic) fail("not a checkpoint (bad magic line)");
  ++i;
  Checkpoint ckpt;
  bool ended = false;
  while (i < lines.size() && !ended) {
    const std::string& line = lines[i];
    if (line.rfind("meta ", 0) == 0) {
      const auto sp = line.find(' ', 5);
      if (sp == std::string::npos) {
        ckpt.meta[line.substr(5)] = "";
      } else {
        ckpt.meta[line.substr(5, sp - 5)] = line.substr(sp + 1);
      }
      ++i;
    } else if (line.rfind("tensor ", 0) == 0) {
      const auto fields = split_whitespace(line);
      if (fields.size() != 4) fail("tensor header needs name, rows, cols");
      const long rows = std::strtol(fields[2].c_str(), nullptr, 10);
      const long cols = std::strtol(fields[3].c_str(), nullptr, 10);
      if (rows <= 0 || cols <= 0) fail("tensor shape must be positive");
      Tensor value(rows, cols);
      for (long r = 0; r < rows; ++r) {
        ++i;
        if (i >= lines.size()) fail("truncated tensor '" + fields[1] + "'");
        const auto vals = split_whitespace(lines[i]);
        if (static_cast<long>(vals.size()) != cols) fail("expected " + std::to_string(cols) + " values");
        for (long c = 0; c < cols; ++c) {
          char* end = nullptr;
          value(r, c) = std::strtod(vals[static_cast<std::size_t>(c)].c_str(), &end);
          if (end == nullptr || *end != '\0') fail("bad number '" + vals[static_cast<std::size_t>(c)] + "'");
        }
      }
      ckpt.params.add(fields[1], std::move(value));
      ++i;
    } else if (line == "end") {
      ended = true;
    } else {
      fail("unexpected line");
    }
  }
  if (!ended) throw FormatError(origin, 0, "missing 'end' line");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path), path.string());
}

}  // namespace nmtprobe
