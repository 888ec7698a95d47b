// SPDX-License-Identifier: Apache-2.0
#include "anticipate/checkpoint.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "anticipate/errors.hpp"

namespace anticipate {
namespace {

void put_le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const std::string& Checkpoint::config_value(const std::string& key) const {
  auto it = config.find(key);
  if (it == config.end()) throw InputError("checkpoint is missing config key '" + key + "'");
  return it->second;
}

double Checkpoint::config_double(const std::string& key) const {
  const auto& s = config_value(key);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError("checkpoint config '" + key + "' is not a number: " + s);
  return v;
}

std::uint64_t Checkpoint::config_uint(const std::string& key) const {
  const auto& s = config_value(key);
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError("checkpoint config '" + key + "' is not an unsigned integer: " + s);
  return v;
}

const Tensor& Checkpoint::block(const std::string& name) const {
  for (const auto& [n, t] : blocks)
    if (n == name) return t;
  throw InputError("checkpoint has no parameter block '" + name + "'");
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out += kCheckpointMagic;
  out += "\narchitecture " + ckpt.architecture + "\n";
  out += "vocab_hash " + hex64(ckpt.vocab_hash) + "\n";
  for (const auto& [k, v] : ckpt.config) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
      throw std::invalid_argument("checkpoint config entries must be single-line and keys space-free");
    out += "config " + k + " " + v + "\n";
  }
  for (const auto& [name, t] : ckpt.blocks) {
    out += "block " + name + " " + std::to_string(t.rank());
    for (auto d : t.shape()) out += " " + std::to_string(d);
    out += "\n";
  }
  out += "data\n";
  for (const auto& [name, t] : ckpt.blocks)
    for (double v : t.data()) put_le(out, v);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw InputError("truncated checkpoint header");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kCheckpointMagic) throw InputError("not an anticipate checkpoint (bad magic)");
  Checkpoint ckpt;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> shapes;
  for (;;) {
    const std::string line = next_line();
    if (line == "data") break;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "architecture") {
      ss >> ckpt.architecture;
    } else if (kind == "vocab_hash") {
      std::string h;
      ss >> h;
      ckpt.vocab_hash = std::stoull(h, nullptr, 16);
    } else if (kind == "config") {
      std::string key;
      ss >> key;
      std::string value;
      std::getline(ss, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.config[key] = value;
    } else if (kind == "block") {
      std::string name;
      std::size_t rank = 0;
      ss >> name >> rank;
      std::vector<std::size_t> shape(rank);
      for (auto& d : shape) ss >> d;
      if (!ss) throw InputError("malformed checkpoint block line: " + line);
      shapes.emplace_back(name, shape);
    } else {
      throw InputError("unknown checkpoint header line: " + line);
    }
  }
  for (auto& [name, shape] : shapes) {
    Tensor t(shape);
    if (pos + 8 * t.size() > bytes.size()) throw InputError("truncated checkpoint data for block " + name);
    for (std::size_t i = 0; i < t.size(); ++i, pos += 8) t[i] = get_le(bytes.data() + pos);
    ckpt.blocks.emplace_back(name, std::move(t));
  }
  if (pos != bytes.size()) throw InputError("trailing bytes after checkpoint data");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& file, const Checkpoint& checkpoint) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + file.string());
  const auto bytes = serialize_checkpoint(checkpoint);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint read_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace anticipate
