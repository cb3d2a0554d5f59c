#pragma once

#include "kgml/params.hpp"

#include <string>

namespace kgml {

/// Binary checkpoint: "KGMLCKPT" magic, u32 version, length-prefixed config
/// snapshot, then one record per parameter (group, name, shape, raw f64 data,
/// little-endian as stored).
void save_checkpoint(const std::string& path, const ParameterStore& store,
                     const std::string& config_snapshot);

struct Checkpoint {
    std::string config_snapshot;
    ParameterStore store;
};

Checkpoint load_checkpoint(const std::string& path);

/// Copies checkpoint tensors into an existing store; shape or name mismatch
/// is an error.
void restore_into(ParameterStore& dst, const ParameterStore& src);

}  // namespace kgml
