// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "shortft/harness.hpp"

namespace shortft {

namespace {

constexpr const char* kMagic = "shortft-checkpoint";
constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffU) << 24) | ((v & 0xff00U) << 8) | ((v >> 8) & 0xff00U) | (v >> 24);
}

std::string shape_token(const Shape& s) {
  if (s.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

Shape parse_shape(const std::string& tok) {
  Shape s;
  if (tok == "-") return s;
  std::stringstream ss(tok);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != part.size() || part.empty()) {
      throw CheckpointError("checkpoint: bad shape '" + tok + "'");
    }
    s.push_back(static_cast<std::size_t>(v));
  }
  return s;
}

void write_atomic(const std::filesystem::path& path, const void* data, std::size_t size) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("checkpoint: cannot write " + tmp.string());
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!f) throw CheckpointError("checkpoint: short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

bool Checkpoint::has_prefix(const std::string& prefix) const {
  for (const auto& [name, t] : tensors) {
    if (name.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string file_sha256(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  return sha256_hex(bytes.data(), bytes.size());
}

std::vector<unsigned char> encode_blob(const Checkpoint& ckpt) {
  std::vector<unsigned char> out;
  for (const auto& [name, t] : ckpt.tensors) {
    for (double v : t.data()) {
      const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      unsigned char b[4];
      std::memcpy(b, &bits, 4);
      out.insert(out.end(), b, b + 4);
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  std::filesystem::create_directories(dir);
  const std::vector<unsigned char> blob = encode_blob(ckpt);
  std::ostringstream m;
  m << kMagic << ' ' << kFormatVersion << '\n';
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw CheckpointError("checkpoint: meta entry '" + k + "' has whitespace or newlines");
    }
    m << "meta " << k << ' ' << v << '\n';
  }
  for (const auto& [name, t] : ckpt.tensors) {
    m << "tensor " << name << ' ' << shape_token(t.shape()) << '\n';
  }
  m << "sha256 " << sha256_hex(blob.data(), blob.size()) << '\n';
  write_atomic(dir / kBlobName, blob.data(), blob.size());
  const std::string text = m.str();
  write_atomic(dir / kManifestName, text.data(), text.size());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const std::filesystem::path manifest = dir / kManifestName;
  if (!std::filesystem::exists(manifest)) {
    throw CheckpointError("checkpoint: no " + std::string(kManifestName) + " in " + dir.string());
  }
  std::ifstream f(manifest);
  std::string line;
  std::getline(f, line);
  {
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != kMagic || version != kFormatVersion) {
      throw CheckpointError("checkpoint: unsupported manifest header '" + line + "'");
    }
  }
  Checkpoint ckpt;
  std::vector<std::pair<std::string, Shape>> layout;
  std::string hash;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      ckpt.meta[key] = value;
    } else if (kind == "tensor") {
      std::string name, shape;
      ls >> name >> shape;
      layout.emplace_back(name, parse_shape(shape));
    } else if (kind == "sha256") {
      ls >> hash;
    } else {
      throw CheckpointError("checkpoint: unknown manifest line '" + line + "'");
    }
  }
  const std::vector<unsigned char> blob = read_file(dir / kBlobName);
  if (sha256_hex(blob.data(), blob.size()) != hash) {
    throw CheckpointError("checkpoint: hash mismatch for " + (dir / kBlobName).string());
  }
  std::size_t offset = 0;
  for (auto& [name, shape] : layout) {
    const std::size_t n = shape_numel(shape);
    if (offset + 4 * n > blob.size()) throw CheckpointError("checkpoint: blob too short");
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, blob.data() + offset + 4 * i, 4);
      values[i] = static_cast<double>(std::bit_cast<float>(to_le(bits)));
    }
    offset += 4 * n;
    ckpt.tensors.emplace_back(name, Tensor(shape, std::move(values)));
  }
  if (offset != blob.size()) throw CheckpointError("checkpoint: trailing bytes in blob");
  return ckpt;
}

void round_to_storage(std::vector<ParamRef> refs) {
  for (ParamRef& r : refs) {
    for (double& v : r.value->data()) v = static_cast<double>(static_cast<float>(v));
  }
}

void put_params(Checkpoint& ckpt, const std::string& prefix, std::vector<ParamRef> refs) {
  for (const ParamRef& r : refs) {
    const std::string name = prefix + r.name;
    for (auto& [n, t] : ckpt.tensors) {
      if (n == name) throw CheckpointError("checkpoint: duplicate tensor " + name);
    }
    ckpt.tensors.emplace_back(name, *r.value);
  }
}

void get_params(const Checkpoint& ckpt, const std::string& prefix, std::vector<ParamRef> refs) {
  for (ParamRef& r : refs) {
    const std::string name = prefix + r.name;
    const Tensor* t = ckpt.find(name);
    if (!t) throw CheckpointError("checkpoint: missing tensor " + name);
    if (t->shape() != r.value->shape()) {
      throw CheckpointError("checkpoint: tensor " + name + " has shape " +
                            shape_to_string(t->shape()) + ", expected " +
                            shape_to_string(r.value->shape()));
    }
    *r.value = *t;
  }
}

}  // namespace shortft
