#pragma once

#include <string>

#include "ugt/model.hpp"

namespace ugt {

/// Binary sidecar: magic "UGTS", u32 version, u32 section count, then
/// section-tagged little-endian arrays (identities and virtual-edge scores
/// as f32, PE/transition/d_raw as f64 for test exactness).
void save_sidecar(const std::string& path, const Sidecars& sc);
Sidecars load_sidecar(const std::string& path);

/// Human-readable JSON summary (counts plus a virtual-edge score histogram).
std::string sidecar_summary_json(const Sidecars& sc);

} // namespace ugt
