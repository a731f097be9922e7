#pragma once

#include <string>

#include "ugt/tensor.hpp"

namespace ugt {

/// Checkpoint container: magic "UGT1", u32 metadata length, JSON metadata
/// (parameter shapes in name order plus a config hash), then raw
/// little-endian f64 arrays per parameter in sorted name order.
void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::string& config_hash);

struct Checkpoint {
    ParamStore params;
    std::string config_hash;
};

Checkpoint load_checkpoint(const std::string& path);

} // namespace ugt
