#include "mctsnet/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mctsnet/errors.hpp"

namespace mctsnet::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated checkpoint");
  return v;
}

void write_entry(std::ostream& out, const std::string& name, const Tensor& t) {
  put_u64(out, name.size());
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, t.rank());
  for (auto d : t.shape()) put_u64(out, d);
  for (double v : t.values()) put_f64(out, v);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParamStore& store) {
  out.write(kCheckpointMagic, 8);
  bool step_written = false;
  const Tensor step = Tensor::scalar(static_cast<double>(store.step()));
  for (const auto& [name, entry] : store.entries()) {
    if (!step_written && name > kStepEntry) {
      write_entry(out, kStepEntry, step);
      step_written = true;
    }
    write_entry(out, name, entry.value);
  }
  if (!step_written) write_entry(out, kStepEntry, step);
  if (!out) throw IoError("failed writing checkpoint");
}

ParamStore read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw IoError("not a checkpoint file (bad magic)");
  }
  ParamStore store;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto len = get_u64(in);
    if (len > 4096) throw IoError("implausible parameter name length in checkpoint");
    std::string name(len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(len))) throw IoError("truncated checkpoint");
    const auto rank = get_u64(in);
    if (rank == 0 || rank > 8) throw IoError("implausible rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get_u64(in);
    std::vector<double> data(shape_size(shape));
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw IoError("truncated values for " + name);
    }
    if (name == kStepEntry) {
      store.set_step(static_cast<std::uint64_t>(data.at(0)));
    } else {
      store.add(name, Tensor(std::move(shape), std::move(data)));
    }
  }
  return store;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, store);
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

void load_checkpoint_into(const std::filesystem::path& path, ParamStore& store) {
  const ParamStore loaded = load_checkpoint(path);
  for (const auto& name : store.names()) {
    if (!loaded.contains(name)) throw IoError("checkpoint " + path.string() + " lacks parameter " + name);
    const Tensor& src = loaded.value(name);
    Tensor& dst = store.value(name);
    if (src.shape() != dst.shape()) {
      throw DimensionError("parameter " + name + " has shape " + shape_string(src.shape()) + " in checkpoint, expected " +
                           shape_string(dst.shape()));
    }
    dst = src;
  }
  store.set_step(loaded.step());
}

}  // namespace mctsnet::nn
