#pragma once

// Dataset files come in pairs: <base>.json carries the manifest (layout,
// classes, normalization stats, split, sequence index) and <base>.bin holds
// the concatenated little-endian f64 frame blobs at the offsets the
// manifest lists.  Writing the same dataset twice produces identical bytes.

#include <string>

#include "smdm/motion.hpp"

namespace smdm {

void save_dataset(const Dataset& ds, const std::string& base_path);
Dataset load_dataset(const std::string& base_path);

}  // namespace smdm
