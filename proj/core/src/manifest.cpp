// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace opir {

const std::string* ManifestRecord::find_aux(const std::string& name) const {
    for (const auto& [n, p] : aux)
        if (n == name) return &p;
    return nullptr;
}

std::string Manifest::resolve(const std::string& rel) const {
    return (std::filesystem::path(dir) / rel).string();
}

Manifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_manifest: cannot open " + path);
    Manifest m;
    m.dir = std::filesystem::path(path).parent_path().string();
    if (m.dir.empty()) m.dir = ".";

    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        ManifestRecord rec;
        std::istringstream ss(line);
        std::string field;
        while (ss >> field) {
            const auto eq = field.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("load_manifest: bad field at line " +
                                         std::to_string(lineno));
            const std::string key = field.substr(0, eq);
            const std::string val = field.substr(eq + 1);
            if (key == "id") rec.id = val;
            else if (key == "task") rec.task_id = std::stoi(val);
            else if (key == "clean") rec.clean_path = val;
            else if (key == "degraded") rec.degraded_path = val;
            else if (key == "seed") rec.seed = std::stoull(val);
            else if (key == "params") rec.params = val;
            else if (key == "aux") {
                std::istringstream as(val);
                std::string item;
                while (std::getline(as, item, ';')) {
                    const auto colon = item.find(':');
                    if (colon == std::string::npos)
                        throw std::runtime_error("load_manifest: bad aux entry at line " +
                                                 std::to_string(lineno));
                    rec.aux.emplace_back(item.substr(0, colon), item.substr(colon + 1));
                }
            } else {
                throw std::runtime_error("load_manifest: unknown field '" + key + "' at line " +
                                         std::to_string(lineno));
            }
        }
        if (rec.id.empty() || rec.clean_path.empty() || rec.degraded_path.empty())
            throw std::runtime_error("load_manifest: incomplete record at line " +
                                     std::to_string(lineno));
        m.records.push_back(std::move(rec));
    }
    return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_manifest: cannot open " + path);
    for (const auto& rec : m.records) {
        f << "id=" << rec.id << " task=" << rec.task_id << " clean=" << rec.clean_path
          << " degraded=" << rec.degraded_path;
        if (!rec.aux.empty()) {
            f << " aux=";
            for (std::size_t i = 0; i < rec.aux.size(); ++i) {
                if (i) f << ';';
                f << rec.aux[i].first << ':' << rec.aux[i].second;
            }
        }
        f << " seed=" << rec.seed;
        if (!rec.params.empty()) f << " params=" << rec.params;
        f << '\n';
    }
    if (!f) throw std::runtime_error("save_manifest: write failed for " + path);
}

} // namespace opir
