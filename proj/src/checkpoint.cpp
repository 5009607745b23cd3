#include "pinet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "pinet/config_json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian platform");

namespace pinet {

namespace {

using nlohmann::json;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_tensor(std::ostream& out, const std::string& name, const Mat& m) {
  write_u64(out, name.size());
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

struct TensorRecord {
  std::string name;
  Mat value;
};

TensorRecord read_tensor(std::istream& in, const std::string& origin) {
  TensorRecord t;
  const std::uint64_t name_len = read_u64(in);
  if (!in || name_len > 4096)
    throw DataError(origin + ": corrupt tensor name header");
  t.name.resize(name_len);
  in.read(t.name.data(), static_cast<std::streamsize>(name_len));
  const auto rows = static_cast<long>(read_u64(in));
  const auto cols = static_cast<long>(read_u64(in));
  if (!in || rows < 0 || cols < 0 || rows * cols > (1L << 28))
    throw DataError(origin + ": corrupt tensor shape for '" + t.name + "'");
  t.value.resize(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      double v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      t.value(r, c) = v;
    }
  if (!in) throw DataError(origin + ": truncated tensor data for '" + t.name + "'");
  return t;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PiNet& net,
                     const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");

  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_u32(out, kCheckpointVersion);

  json header;
  header["model"] = to_json(net.config());
  header["seed"] = meta.seed;
  header["prng"] = meta.prng_id;
  header["step"] = meta.step_counter;
  const std::string header_text = header.dump();
  write_u64(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  const auto& params = net.store().params();
  write_u64(out, params.size() + 2);
  write_tensor(out, "norm.mean", net.stats().mean);
  write_tensor(out, "norm.std", net.stats().stddev);
  for (const auto& p : params) write_tensor(out, p->name, p->value);

  if (!out) throw IoError("write failure on " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string origin = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + origin);

  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw DataError(origin + ": not a checkpoint file (bad magic)");
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion)
    throw DataError(origin + ": unsupported checkpoint version " +
                    std::to_string(version));

  const std::uint64_t header_len = read_u64(in);
  if (!in || header_len > (1u << 20))
    throw DataError(origin + ": corrupt header length");
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError(origin + ": truncated header");

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::parse_error& e) {
    throw DataError(origin + ": corrupt header json: " + e.what());
  }

  ModelConfig cfg = model_config_from_json(header.at("model"));
  CheckpointMeta meta;
  meta.seed = header.value("seed", 0ULL);
  meta.prng_id = header.value("prng", std::string(Rng::kAlgorithmId));
  meta.step_counter = header.value("step", 0L);

  const std::uint64_t tensor_count = read_u64(in);
  if (tensor_count < 2)
    throw DataError(origin + ": checkpoint carries no tensors");

  TensorRecord mean = read_tensor(in, origin);
  TensorRecord stddev = read_tensor(in, origin);
  if (mean.name != "norm.mean" || stddev.name != "norm.std")
    throw DataError(origin + ": expected norm.mean/norm.std tensors first");
  if (mean.value.rows() != cfg.input_dim() || mean.value.cols() != 1 ||
      stddev.value.rows() != cfg.input_dim() || stddev.value.cols() != 1)
    throw DataError(origin + ": normalization stats shape mismatch");

  NormStats stats;
  stats.mean = mean.value.col(0);
  stats.stddev = stddev.value.col(0);

  LoadedCheckpoint loaded{PiNet(cfg, stats), meta};
  auto& params = loaded.net.store().params();
  if (tensor_count != params.size() + 2)
    throw DataError(origin + ": tensor count " + std::to_string(tensor_count) +
                    " does not match config (" + std::to_string(params.size() + 2) +
                    ")");
  for (auto& p : params) {
    TensorRecord t = read_tensor(in, origin);
    if (t.name != p->name)
      throw DataError(origin + ": tensor '" + t.name + "' where '" + p->name +
                      "' was expected");
    if (t.value.rows() != p->value.rows() || t.value.cols() != p->value.cols())
      throw DataError(origin + ": tensor '" + t.name + "' has shape " +
                      std::to_string(t.value.rows()) + "x" +
                      std::to_string(t.value.cols()) + ", config requires " +
                      std::to_string(p->value.rows()) + "x" +
                      std::to_string(p->value.cols()));
    p->value = std::move(t.value);
  }
  return loaded;
}

}  // namespace pinet
