// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_MANIFEST_HPP
#define OPIR_MANIFEST_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace opir {

/// One clean/degraded pair. Paths are relative to the manifest directory;
/// aux maps (R/M/S/t/gain) are raw tensor files. `params` keeps the
/// generator parameters as comma-separated key=value text.
struct ManifestRecord {
    std::string id;
    int task_id = 0;
    std::string clean_path;
    std::string degraded_path;
    std::vector<std::pair<std::string, std::string>> aux; // name -> path
    std::uint64_t seed = 0;
    std::string params;

    const std::string* find_aux(const std::string& name) const;
};

struct Manifest {
    std::string dir; // directory the relative paths resolve against
    std::vector<ManifestRecord> records;

    std::string resolve(const std::string& rel) const;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

} // namespace opir

#endif
