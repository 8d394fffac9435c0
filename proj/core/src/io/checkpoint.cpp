#include "expctr/io/checkpoint.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>

#include "expctr/error.hpp"

namespace expctr::io {

namespace {

constexpr char kMagic[8] = {'E', 'X', 'P', 'C', 'T', 'R', 'v', '1'};

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw ValidationError("checkpoint: truncated file " + path.string());
  }
  return value;
}

}  // namespace

void write_blocks(const std::filesystem::path& path, std::span<const NamedBlock> blocks) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("checkpoint: cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, blocks.size());
  for (const NamedBlock& b : blocks) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(b.tensor.rank()));
    for (std::size_t d : b.tensor.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(b.tensor.data()),
              static_cast<std::streamsize>(b.tensor.size() * sizeof(double)));
  }
  if (!out) throw RuntimeFailure("checkpoint: write failed for " + path.string());
}

std::vector<NamedBlock> read_blocks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint: cannot open " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + sizeof(magic), kMagic)) {
    throw ValidationError("checkpoint: bad header in " + path.string());
  }
  const auto count = get<std::uint64_t>(in, path);
  std::vector<NamedBlock> blocks;
  blocks.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedBlock b;
    b.name.resize(get<std::uint32_t>(in, path));
    if (!in.read(b.name.data(), static_cast<std::streamsize>(b.name.size()))) {
      throw ValidationError("checkpoint: truncated file " + path.string());
    }
    const auto rank = get<std::uint32_t>(in, path);
    numerics::Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in, path);
    b.tensor = numerics::Tensor(shape);
    if (!in.read(reinterpret_cast<char*>(b.tensor.data()),
                 static_cast<std::streamsize>(b.tensor.size() * sizeof(double)))) {
      throw ValidationError("checkpoint: truncated file " + path.string());
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

std::vector<NamedBlock> to_blocks(const numerics::ParameterRefs& params, const std::string& prefix) {
  std::vector<NamedBlock> blocks;
  blocks.reserve(params.size());
  for (const auto* p : params) blocks.push_back({prefix + p->name, p->value});
  return blocks;
}

const NamedBlock& find_block(std::span<const NamedBlock> blocks, const std::string& name) {
  auto it = std::find_if(blocks.begin(), blocks.end(), [&](const NamedBlock& b) { return b.name == name; });
  if (it == blocks.end()) throw ValidationError("checkpoint: missing block '" + name + "'");
  return *it;
}

void load_blocks(std::span<const NamedBlock> blocks, const numerics::ParameterRefs& params,
                 const std::string& prefix) {
  for (auto* p : params) {
    const NamedBlock& b = find_block(blocks, prefix + p->name);
    if (!b.tensor.same_shape(p->value)) {
      throw ValidationError("checkpoint: block '" + b.name + "' has shape " + numerics::to_string(b.tensor.shape()) +
                            ", expected " + numerics::to_string(p->value.shape()));
    }
    p->value = b.tensor;
  }
}

}  // namespace expctr::io
