#include "rnls/snapshot.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "rnls/binary_io.hpp"
#include "rnls/error.hpp"

namespace rnls {
using binary::put_le;

namespace {

template <class T>
T get_le(std::istream& is) {
  return binary::get_le<T>(is, "snapshot file");
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const Field& field) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open snapshot for writing: " + path.string());
  os.write("RNLS", 4);
  put_le<std::uint32_t>(os, kSnapshotVersion);
  put_le<std::uint32_t>(os, std::uint32_t(field.grid().dim()));
  put_le<std::uint32_t>(os, std::uint32_t(field.grid().n()));
  put_le<double>(os, field.grid().half_length());
  for (const auto& z : field.values()) {
    put_le<double>(os, z.real());
    put_le<double>(os, z.imag());
  }
  if (!os) throw Error("failed writing snapshot: " + path.string());
}

Field read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open snapshot: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "RNLS", 4) != 0) throw Error("not a snapshot file (bad magic): " + path.string());
  auto version = get_le<std::uint32_t>(is);
  if (version != kSnapshotVersion) throw Error("unsupported snapshot version " + std::to_string(version));
  auto dim = get_le<std::uint32_t>(is);
  auto n = get_le<std::uint32_t>(is);
  auto L = get_le<double>(is);
  auto grid = make_grid(int(dim), int(n), L);
  std::vector<cplx> values(grid->size());
  for (auto& z : values) {
    double re = get_le<double>(is);
    double im = get_le<double>(is);
    z = cplx(re, im);
  }
  return Field(grid, std::move(values));
}

}  // namespace rnls
