#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphrouter/common/error.hpp"
#include "graphrouter/model/params.hpp"

namespace graphrouter::train {

using model::ModelParams;
using numerics::Tensor;

// Checkpoint file layout (little-endian, as produced on x86-64):
//   "GRTRCKPT"  8-byte magic
//   u32         format version (currently 1)
//   u64         header length
//   bytes       header JSON: {"dims": {...}, "meta": {...}, "tensors": N}
//   N times     u32 name length, name bytes, u32 rank, i64 shape[rank],
//               f64 data[numel]
// Tensors appear in ModelParams::for_each order, so saving the same
// parameters twice produces byte-identical files.

namespace detail {

constexpr char kCheckpointMagic[8] = {'G', 'R', 'T', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in, const std::string& path, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in)
    throw io_error("checkpoint '" + path + "': truncated while reading " +
                   what);
  return v;
}

}  // namespace detail

struct Checkpoint {
  ModelParams params;
  nlohmann::json meta;
};

// Writes atomically: a temp file in the same directory is renamed over the
// target, so readers never observe a half-written checkpoint.
inline void save_checkpoint(const std::filesystem::path& path,
                            const ModelParams& params,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  namespace d = detail;
  const auto named = params.named_tensors();
  nlohmann::json header = {
      {"dims",
       {{"feat_dim", params.dims.feat_dim},
        {"hidden", params.dims.hidden},
        {"layers", params.dims.layers}}},
      {"meta", meta},
      {"tensors", named.size()},
  };
  const std::string header_bytes = header.dump();

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw io_error("checkpoint: cannot open '" + tmp.string() +
                     "' for writing");
    out.write(d::kCheckpointMagic, sizeof d::kCheckpointMagic);
    d::write_pod(out, d::kCheckpointVersion);
    d::write_pod(out, static_cast<std::uint64_t>(header_bytes.size()));
    out.write(header_bytes.data(),
              static_cast<std::streamsize>(header_bytes.size()));
    for (const auto& [name, t] : named) {
      d::write_pod(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      d::write_pod(out, static_cast<std::uint32_t>(t->rank()));
      for (std::int64_t dim : t->shape()) d::write_pod(out, dim);
      out.write(reinterpret_cast<const char*>(t->data()),
                static_cast<std::streamsize>(t->numel() * 8));
    }
    if (!out)
      throw io_error("checkpoint: write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw io_error("checkpoint: cannot move '" + tmp.string() + "' to '" +
                   path.string() + "': " + ec.message());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  namespace d = detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("checkpoint: cannot open '" + path.string() + "'");
  const std::string p = path.string();

  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, d::kCheckpointMagic, sizeof magic) != 0)
    throw io_error("checkpoint '" + p + "': bad magic, not a checkpoint file");
  const auto version = d::read_pod<std::uint32_t>(in, p, "version");
  if (version != d::kCheckpointVersion)
    throw io_error("checkpoint '" + p + "': unsupported version " +
                   std::to_string(version));

  const auto header_len = d::read_pod<std::uint64_t>(in, p, "header length");
  std::string header_bytes(header_len, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw io_error("checkpoint '" + p + "': truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw io_error("checkpoint '" + p + "': bad header JSON: " + e.what());
  }

  model::ModelDims dims;
  try {
    dims.feat_dim = header.at("dims").at("feat_dim").get<int>();
    dims.hidden = header.at("dims").at("hidden").get<int>();
    dims.layers = header.at("dims").at("layers").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw io_error("checkpoint '" + p + "': bad dims in header: " + e.what());
  }
  dims.validate();

  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  ckpt.params = ModelParams::init(dims, 0);  // shapes only; values overwritten
  const auto named = ckpt.params.named_tensors();
  if (header.value("tensors", std::size_t{0}) != named.size())
    throw io_error("checkpoint '" + p + "': header announces " +
                   header.at("tensors").dump() + " tensors, model needs " +
                   std::to_string(named.size()));

  for (const auto& [name, t] : named) {
    const auto name_len = d::read_pod<std::uint32_t>(in, p, "tensor name");
    std::string stored(name_len, '\0');
    in.read(stored.data(), name_len);
    if (!in) throw io_error("checkpoint '" + p + "': truncated tensor name");
    if (stored != name)
      throw io_error("checkpoint '" + p + "': tensor '" + stored +
                     "' where '" + name + "' was expected");
    const auto rank = d::read_pod<std::uint32_t>(in, p, "tensor rank");
    std::vector<std::int64_t> shape(rank);
    for (auto& dim : shape) dim = d::read_pod<std::int64_t>(in, p, "shape");
    if (shape != t->shape())
      throw io_error("checkpoint '" + p + "': tensor '" + name + "' has shape " +
                     Tensor::shape_string(shape) + ", expected " +
                     t->shape_string());
    in.read(reinterpret_cast<char*>(t->data()),
            static_cast<std::streamsize>(t->numel() * 8));
    if (!in)
      throw io_error("checkpoint '" + p + "': truncated data for '" + name +
                     "'");
    if (!t->all_finite())
      throw numeric_error("checkpoint '" + p + "': non-finite values in '" +
                          name + "'");
  }
  in.peek();
  if (!in.eof())
    throw io_error("checkpoint '" + p + "': trailing bytes after last tensor");
  return ckpt;
}

}  // namespace graphrouter::train
