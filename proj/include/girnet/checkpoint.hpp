#pragma once

// Checkpoint container: model config, progress counters, parameters and Adam
// moments in one little-endian binary file.
//
// Layout: magic "GIRN", u32 format version, u8 dtype size, config block,
// epoch/step/seed, Adam hyperparameters and step count, then three named
// tensor tables (params, m, v). Tensor bytes round-trip bit-exactly. Saves
// go through a temp file and rename, so a crash never corrupts an existing
// checkpoint.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "girnet/adam.hpp"
#include "girnet/errors.hpp"
#include "girnet/model.hpp"
#include "girnet/tensor.hpp"

namespace girnet {

template <typename T>
struct Checkpoint {
  ModelConfig config;
  std::int64_t epoch = 0;  // completed epochs
  std::int64_t step = 0;   // completed optimizer steps
  std::uint64_t seed = 0;
  AdamConfig adam;
  std::int64_t adam_t = 0;
  std::map<std::string, Tensor<T>> params;
  std::map<std::string, Tensor<T>> m;
  std::map<std::string, Tensor<T>> v;
};

namespace detail {

constexpr char kCkptMagic[4] = {'G', 'I', 'R', 'N'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename V>
void put(std::ostream& os, V value) {
  static_assert(std::is_trivially_copyable_v<V>);
  os.write(reinterpret_cast<const char*>(&value), sizeof(V));
}

template <typename V>
V get(std::istream& is, const char* what) {
  V value;
  is.read(reinterpret_cast<char*>(&value), sizeof(V));
  if (!is) throw DataError(std::string("checkpoint: truncated file reading ") + what);
  return value;
}

template <typename T>
void put_table(std::ostream& os, const std::map<std::string, Tensor<T>>& table) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(table.size()));
  for (const auto& [name, t] : table) {
    put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (int d : t.shape()) put<std::int32_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(T)));
  }
}

template <typename T>
std::map<std::string, Tensor<T>> get_table(std::istream& is, const char* what) {
  std::map<std::string, Tensor<T>> table;
  const auto count = get<std::uint32_t>(is, what);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint16_t>(is, what);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw DataError(std::string("checkpoint: truncated file reading ") + what);
    const auto rank = get<std::uint8_t>(is, what);
    if (rank > kMaxRank) throw DataError("checkpoint: corrupt tensor rank");
    Shape shape(rank);
    for (std::uint8_t d = 0; d < rank; ++d) shape[d] = get<std::int32_t>(is, what);
    check_shape_valid(shape, "checkpoint");
    Tensor<T> t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(T)));
    if (!is) throw DataError(std::string("checkpoint: truncated file reading ") + what);
    table.emplace(std::move(name), std::move(t));
  }
  return table;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ck) {
  namespace fs = std::filesystem;
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("checkpoint: cannot open '" + tmp.string() + "' for writing");
    os.write(detail::kCkptMagic, 4);
    detail::put<std::uint32_t>(os, detail::kCkptVersion);
    detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(sizeof(T)));
    detail::put<std::int32_t>(os, ck.config.channels);
    detail::put<std::int32_t>(os, ck.config.n_res_extract);
    detail::put<std::int32_t>(os, ck.config.n_res_recon);
    detail::put<std::int32_t>(os, static_cast<std::int32_t>(ck.config.attention_kind));
    detail::put<std::int32_t>(os, ck.config.scale);
    detail::put<std::uint8_t>(os, ck.config.use_deformable ? 1 : 0);
    detail::put<std::uint8_t>(os, ck.config.use_global_residual ? 1 : 0);
    detail::put<std::uint8_t>(os, ck.config.gstir_use_global_info ? 1 : 0);
    detail::put<std::uint8_t>(os, ck.config.gstir_use_residual ? 1 : 0);
    detail::put<std::int64_t>(os, ck.epoch);
    detail::put<std::int64_t>(os, ck.step);
    detail::put<std::uint64_t>(os, ck.seed);
    detail::put<double>(os, ck.adam.lr);
    detail::put<double>(os, ck.adam.beta1);
    detail::put<double>(os, ck.adam.beta2);
    detail::put<double>(os, ck.adam.eps);
    detail::put<std::int64_t>(os, ck.adam_t);
    detail::put_table(os, ck.params);
    detail::put_table(os, ck.m);
    detail::put_table(os, ck.v);
    if (!os) throw DataError("checkpoint: write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

// Loads a checkpoint; when `expect` is given, a config that differs from it
// is rejected.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path,
                              const ModelConfig* expect = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open '" + path.string() + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, detail::kCkptMagic, 4) != 0)
    throw DataError("checkpoint: '" + path.string() + "' is not a checkpoint file");
  const auto version = detail::get<std::uint32_t>(is, "version");
  if (version != detail::kCkptVersion)
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  const auto dtype = detail::get<std::uint8_t>(is, "dtype");
  if (dtype != sizeof(T))
    throw DataError("checkpoint: dtype width " + std::to_string(int(dtype)) +
                    " does not match requested width " + std::to_string(sizeof(T)));
  Checkpoint<T> ck;
  ck.config.channels = detail::get<std::int32_t>(is, "config");
  ck.config.n_res_extract = detail::get<std::int32_t>(is, "config");
  ck.config.n_res_recon = detail::get<std::int32_t>(is, "config");
  const auto att = detail::get<std::int32_t>(is, "config");
  if (att < 0 || att > 2) throw DataError("checkpoint: corrupt attention kind");
  ck.config.attention_kind = static_cast<AttentionKind>(att);
  ck.config.scale = detail::get<std::int32_t>(is, "config");
  ck.config.use_deformable = detail::get<std::uint8_t>(is, "config") != 0;
  ck.config.use_global_residual = detail::get<std::uint8_t>(is, "config") != 0;
  ck.config.gstir_use_global_info = detail::get<std::uint8_t>(is, "config") != 0;
  ck.config.gstir_use_residual = detail::get<std::uint8_t>(is, "config") != 0;
  ck.config.validate();
  ck.epoch = detail::get<std::int64_t>(is, "epoch");
  ck.step = detail::get<std::int64_t>(is, "step");
  ck.seed = detail::get<std::uint64_t>(is, "seed");
  ck.adam.lr = detail::get<double>(is, "adam");
  ck.adam.beta1 = detail::get<double>(is, "adam");
  ck.adam.beta2 = detail::get<double>(is, "adam");
  ck.adam.eps = detail::get<double>(is, "adam");
  ck.adam_t = detail::get<std::int64_t>(is, "adam");
  ck.params = detail::get_table<T>(is, "params");
  ck.m = detail::get_table<T>(is, "m");
  ck.v = detail::get_table<T>(is, "v");
  if (expect && !(ck.config == *expect))
    throw DataError("checkpoint: config in '" + path.string() +
                    "' does not match the requested model config");
  return ck;
}

}  // namespace girnet
