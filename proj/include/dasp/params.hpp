#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dasp/tensor.hpp"

namespace dasp {

struct ParamDef {
  std::string name;
  Tensor value;
  bool trainable = true;
  Tensor adam_m, adam_v;  // optimizer state, lazily sized
};

/// Named parameter set for one or more modules. Parameters are addressed by
/// integer id; names are hierarchical ("depth.enc1.w") and used as checkpoint
/// keys.
class ParamStore {
 public:
  int add(const std::string& name, Tensor init, bool trainable = true);
  int find(const std::string& name) const;  // -1 if absent

  ParamDef& def(int id) { return defs_[static_cast<size_t>(id)]; }
  const ParamDef& def(int id) const { return defs_[static_cast<size_t>(id)]; }
  int size() const { return static_cast<int>(defs_.size()); }

  std::vector<int> all_ids() const;
  std::vector<int> ids_with_prefix(const std::string& prefix) const;

  void freeze_all();
  bool all_frozen() const;

  std::int64_t value_count() const;
  /// FNV-1a over the raw bytes of every parameter value, in id order.
  std::uint64_t checksum() const;

 private:
  std::vector<ParamDef> defs_;
  std::unordered_map<std::string, int> index_;
};

/// Checkpoint archive: format tag + version, a JSON manifest, then every
/// parameter keyed by its name.
void save_checkpoint(const std::string& path, const ParamStore& store, const std::string& manifest_json);
/// Returns the manifest; `store` is rebuilt from the file.
std::string load_checkpoint(const std::string& path, ParamStore& store);

}  // namespace dasp
