#include "dasp/params.hpp"

#include <cstring>
#include <fstream>

namespace dasp {

int ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  DASP_CHECK(index_.find(name) == index_.end(), "duplicate parameter name: " + name);
  ParamDef d;
  d.name = name;
  d.value = std::move(init);
  d.trainable = trainable;
  defs_.push_back(std::move(d));
  const int id = static_cast<int>(defs_.size()) - 1;
  index_[name] = id;
  return id;
}

int ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> ParamStore::all_ids() const {
  std::vector<int> ids(defs_.size());
  for (size_t i = 0; i < defs_.size(); ++i) ids[i] = static_cast<int>(i);
  return ids;
}

std::vector<int> ParamStore::ids_with_prefix(const std::string& prefix) const {
  std::vector<int> ids;
  for (size_t i = 0; i < defs_.size(); ++i) {
    if (defs_[i].name.rfind(prefix, 0) == 0) ids.push_back(static_cast<int>(i));
  }
  return ids;
}

void ParamStore::freeze_all() {
  for (auto& d : defs_) d.trainable = false;
}

bool ParamStore::all_frozen() const {
  for (const auto& d : defs_) {
    if (d.trainable) return false;
  }
  return true;
}

std::int64_t ParamStore::value_count() const {
  std::int64_t n = 0;
  for (const auto& d : defs_) n += d.value.numel();
  return n;
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& d : defs_) {
    mix(d.name.data(), d.name.size());
    mix(d.value.data(), static_cast<size_t>(d.value.numel()) * sizeof(real));
  }
  return h;
}

namespace {

constexpr char kMagic[8] = {'D', 'A', 'S', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  DASP_CHECK(is.good(), "truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store, const std::string& manifest_json) {
  std::ofstream os(path, std::ios::binary);
  DASP_CHECK(os.good(), "cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, manifest_json.size());
  os.write(manifest_json.data(), static_cast<std::streamsize>(manifest_json.size()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(store.size()));
  for (int i = 0; i < store.size(); ++i) {
    const ParamDef& d = store.def(i);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(d.name.size()));
    os.write(d.name.data(), static_cast<std::streamsize>(d.name.size()));
    put<std::uint8_t>(os, d.trainable ? 1 : 0);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(d.value.ndim()));
    for (int k = 0; k < d.value.ndim(); ++k) put<std::uint32_t>(os, static_cast<std::uint32_t>(d.value.dim(k)));
    os.write(reinterpret_cast<const char*>(d.value.data()),
             static_cast<std::streamsize>(d.value.numel() * static_cast<std::int64_t>(sizeof(real))));
  }
  DASP_CHECK(os.good(), "checkpoint write failed: " + path);
}

std::string load_checkpoint(const std::string& path, ParamStore& store) {
  std::ifstream is(path, std::ios::binary);
  DASP_CHECK(is.good(), "cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  DASP_CHECK(is.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
             "not a checkpoint file: " + path);
  const auto version = get<std::uint32_t>(is);
  DASP_CHECK(version == kVersion, "unsupported checkpoint version " + std::to_string(version));
  const auto mlen = get<std::uint64_t>(is);
  std::string manifest(mlen, '\0');
  is.read(manifest.data(), static_cast<std::streamsize>(mlen));
  const auto count = get<std::uint64_t>(is);
  store = ParamStore();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto nlen = get<std::uint32_t>(is);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    const bool trainable = get<std::uint8_t>(is) != 0;
    const auto ndim = get<std::uint32_t>(is);
    Shape shape(ndim);
    for (auto& d : shape) d = static_cast<int>(get<std::uint32_t>(is));
    Tensor value(shape);
    is.read(reinterpret_cast<char*>(value.data()),
            static_cast<std::streamsize>(value.numel() * static_cast<std::int64_t>(sizeof(real))));
    DASP_CHECK(is.good(), "truncated checkpoint: " + path);
    store.add(name, std::move(value), trainable);
  }
  return manifest;
}

}  // namespace dasp
