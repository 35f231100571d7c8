// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace opir::ckpt {

namespace fs = std::filesystem;

namespace {

void write_float_tensor(const std::string& path, const std::vector<float>& v) {
    Image flat(1, 1, static_cast<int>(v.size()));
    flat.data = v;
    save_tensor_file(flat, path);
}

std::vector<float> read_float_tensor(const std::string& path, std::size_t expect) {
    Image flat = load_tensor_file(path);
    if (expect != 0 && flat.data.size() != expect)
        throw std::runtime_error("checkpoint: tensor size mismatch in " + path);
    return std::move(flat.data);
}

std::string scales_to_string(const std::vector<int>& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(s[i]);
    }
    return out;
}

std::vector<int> scales_from_string(const std::string& s) {
    std::vector<int> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

} // namespace

void save_checkpoint(const std::string& dir, net::TwoStageModel& model,
                     const CheckpointExtras* extras) {
    fs::create_directories(dir);
    std::ofstream idx(fs::path(dir) / "index.txt");
    if (!idx) throw std::runtime_error("save_checkpoint: cannot open index in " + dir);

    const auto& c = model.cfg;
    idx << "config in_channels " << c.in_channels << '\n';
    idx << "config base_width " << c.base_width << '\n';
    idx << "config tam_dim " << c.tam_dim << '\n';
    idx << "config tam_hidden " << c.tam_hidden << '\n';
    idx << "config num_tasks " << c.num_tasks << '\n';
    idx << "config scales " << scales_to_string(c.scales) << '\n';
    idx << "config use_tam " << (c.variant.use_tam ? 1 : 0) << '\n';
    idx << "config two_stage " << (c.variant.two_stage ? 1 : 0) << '\n';
    idx << "config use_um " << (c.variant.use_um ? 1 : 0) << '\n';

    for (const auto& ref : net::collect_params(model)) {
        const std::string file = ref.name + ".tnsr";
        write_float_tensor((fs::path(dir) / file).string(), ref.p->v);
        idx << "param " << ref.name << ' ' << file;
        for (int d : ref.p->shape) idx << ' ' << d;
        idx << '\n';
    }

    if (extras) {
        for (const auto& [name, v] : extras->tensors) {
            const std::string file = name + ".tnsr";
            write_float_tensor((fs::path(dir) / file).string(), v);
            idx << "extra " << name << ' ' << file << '\n';
        }
        for (const auto& [k, v] : extras->scalars) idx << "scalar " << k << ' ' << v << '\n';
    }
    if (!idx) throw std::runtime_error("save_checkpoint: write failed in " + dir);
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
    std::ifstream idx(fs::path(dir) / "index.txt");
    if (!idx) throw std::runtime_error("load_checkpoint: cannot open index in " + dir);

    net::ModelConfig cfg;
    struct ParamLine {
        std::string name, file;
    };
    std::vector<ParamLine> params;
    CheckpointExtras extras;
    std::vector<std::pair<std::string, std::string>> extra_files;

    std::string line;
    while (std::getline(idx, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string kind;
        ss >> kind;
        if (kind == "config") {
            std::string key, val;
            ss >> key >> val;
            if (key == "in_channels") cfg.in_channels = std::stoi(val);
            else if (key == "base_width") cfg.base_width = std::stoi(val);
            else if (key == "tam_dim") cfg.tam_dim = std::stoi(val);
            else if (key == "tam_hidden") cfg.tam_hidden = std::stoi(val);
            else if (key == "num_tasks") cfg.num_tasks = std::stoi(val);
            else if (key == "scales") cfg.scales = scales_from_string(val);
            else if (key == "use_tam") cfg.variant.use_tam = val == "1";
            else if (key == "two_stage") cfg.variant.two_stage = val == "1";
            else if (key == "use_um") cfg.variant.use_um = val == "1";
            else throw std::runtime_error("load_checkpoint: unknown config key " + key);
        } else if (kind == "param") {
            ParamLine p;
            ss >> p.name >> p.file;
            params.push_back(std::move(p));
        } else if (kind == "extra") {
            std::string name, file;
            ss >> name >> file;
            extra_files.emplace_back(name, file);
        } else if (kind == "scalar") {
            std::string key, val;
            ss >> key >> val;
            extras.scalars[key] = val;
        } else {
            throw std::runtime_error("load_checkpoint: bad index line: " + line);
        }
    }

    LoadedCheckpoint out{net::make_model(cfg, 0), std::move(extras)};
    auto refs = net::collect_params(out.model);
    if (refs.size() != params.size())
        throw std::runtime_error("load_checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i].name != params[i].name)
            throw std::runtime_error("load_checkpoint: parameter name mismatch: expected " +
                                     refs[i].name + " got " + params[i].name);
        refs[i].p->v =
            read_float_tensor((fs::path(dir) / params[i].file).string(), refs[i].p->size());
    }
    for (const auto& [name, file] : extra_files)
        out.extras.tensors[name] = read_float_tensor((fs::path(dir) / file).string(), 0);
    return out;
}

bool is_checkpoint_dir(const std::string& dir) {
    return fs::is_directory(dir) && fs::exists(fs::path(dir) / "index.txt");
}

} // namespace opir::ckpt
