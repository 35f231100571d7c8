// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/trainer.hpp"

#include "opir/losses.hpp"
#include "opir/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace opir::train {

namespace fs = std::filesystem;

const char* kLossLogHeader = "step,lr,loss_c,loss_e,loss_f,loss_total,psnr_rain,psnr_snow,psnr_haze";

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

const char* kVariants[] = {"full", "no-tam", "no-multiscale", "one-stage", "no-um"};

bool known_variant(const std::string& v) {
    for (const char* k : kVariants)
        if (v == k) return true;
    return false;
}

} // namespace

void TrainConfig::validate() const {
    if (!(lr_start > lr_min) || !(lr_min > 0.0))
        throw std::invalid_argument("config: need lr_start > lr_min > 0");
    if (total_steps < 0) throw std::invalid_argument("config: total_steps < 0");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size < 1");
    if (!is_pow2(patch_size) || patch_size < 8)
        throw std::invalid_argument("config: patch_size must be a power of two >= 8");
    if (scales.empty()) throw std::invalid_argument("config: empty scales");
    if (!known_variant(variant))
        throw std::invalid_argument("config: unknown variant '" + variant + "'");
    if (tasks.empty()) throw std::invalid_argument("config: no task manifests");
    if (log_every < 1) throw std::invalid_argument("config: log_every < 1");
}

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::string int_list_to_string(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

void set_task(TrainConfig& cfg, int task_id, const std::string& path) {
    for (auto& t : cfg.tasks)
        if (t.task_id == task_id) {
            t.manifest_path = path;
            return;
        }
    cfg.tasks.push_back({task_id, path, 1.0});
}

void set_weight(TrainConfig& cfg, int task_id, double w) {
    for (auto& t : cfg.tasks)
        if (t.task_id == task_id) {
            t.weight = w;
            return;
        }
    cfg.tasks.push_back({task_id, "", w});
}

} // namespace

TrainConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_config: cannot open " + path);
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
            line.pop_back();
        std::size_t b = 0;
        while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
        line = line.substr(b);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("load_config: expected key=value at line " +
                                     std::to_string(lineno));
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
        std::size_t vb = 0;
        while (vb < val.size() && std::isspace(static_cast<unsigned char>(val[vb]))) ++vb;
        val = val.substr(vb);

        if (key == "lr_start") cfg.lr_start = std::stod(val);
        else if (key == "lr_min") cfg.lr_min = std::stod(val);
        else if (key == "total_steps") cfg.total_steps = std::stoll(val);
        else if (key == "batch_size") cfg.batch_size = std::stoi(val);
        else if (key == "patch_size") cfg.patch_size = std::stoi(val);
        else if (key == "scales") cfg.scales = parse_int_list(val);
        else if (key == "seed") cfg.seed = std::stoull(val);
        else if (key == "checkpoint_every") cfg.checkpoint_every = std::stoll(val);
        else if (key == "log_every") cfg.log_every = std::stoll(val);
        else if (key == "base_width") cfg.base_width = std::stoi(val);
        else if (key == "tam_dim") cfg.tam_dim = std::stoi(val);
        else if (key == "tam_hidden") cfg.tam_hidden = std::stoi(val);
        else if (key == "probe_count") cfg.probe_count = std::stoi(val);
        else if (key == "grad_clip") cfg.grad_clip = std::stod(val);
        else if (key == "out_dir") cfg.out_dir = val;
        else if (key == "variant") cfg.variant = val;
        else if (key == "manifest_rain") set_task(cfg, 0, val);
        else if (key == "manifest_snow") set_task(cfg, 1, val);
        else if (key == "manifest_haze") set_task(cfg, 2, val);
        else if (key == "weight_rain") set_weight(cfg, 0, std::stod(val));
        else if (key == "weight_snow") set_weight(cfg, 1, std::stod(val));
        else if (key == "weight_haze") set_weight(cfg, 2, std::stod(val));
        else
            throw std::runtime_error("load_config: unknown key '" + key + "' at line " +
                                     std::to_string(lineno));
    }
    return cfg;
}

std::string config_to_string(const TrainConfig& cfg) {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9e", cfg.lr_start);
    os << "lr_start = " << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.9e", cfg.lr_min);
    os << "lr_min = " << buf << '\n';
    os << "total_steps = " << cfg.total_steps << '\n';
    os << "batch_size = " << cfg.batch_size << '\n';
    os << "patch_size = " << cfg.patch_size << '\n';
    os << "scales = " << int_list_to_string(cfg.scales) << '\n';
    os << "seed = " << cfg.seed << '\n';
    os << "checkpoint_every = " << cfg.checkpoint_every << '\n';
    os << "log_every = " << cfg.log_every << '\n';
    os << "base_width = " << cfg.base_width << '\n';
    os << "tam_dim = " << cfg.tam_dim << '\n';
    os << "tam_hidden = " << cfg.tam_hidden << '\n';
    os << "probe_count = " << cfg.probe_count << '\n';
    std::snprintf(buf, sizeof buf, "%.9e", cfg.grad_clip);
    os << "grad_clip = " << buf << '\n';
    os << "out_dir = " << cfg.out_dir << '\n';
    os << "variant = " << cfg.variant << '\n';
    for (const auto& t : cfg.tasks) {
        const char* name = t.task_id == 0 ? "rain" : (t.task_id == 1 ? "snow" : "haze");
        if (!t.manifest_path.empty()) os << "manifest_" << name << " = " << t.manifest_path << '\n';
        std::snprintf(buf, sizeof buf, "%g", t.weight);
        os << "weight_" << name << " = " << buf << '\n';
    }
    return os.str();
}

void save_config(const TrainConfig& cfg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_config: cannot open " + path);
    f << config_to_string(cfg);
}

double cosine_lr(long long step, const TrainConfig& cfg) {
    if (step < 0 || step > cfg.total_steps)
        throw std::invalid_argument("cosine_lr: step out of range");
    if (cfg.total_steps == 0) return cfg.lr_start;
    const double frac = static_cast<double>(step) / static_cast<double>(cfg.total_steps);
    return cfg.lr_min + 0.5 * (cfg.lr_start - cfg.lr_min) * (1.0 + std::cos(M_PI * frac));
}

void AdamState::init(const std::vector<net::ParamRef>& params) {
    t = 0;
    m.clear();
    v.clear();
    for (const auto& ref : params) {
        m.emplace_back(ref.p->size(), 0.0f);
        v.emplace_back(ref.p->size(), 0.0f);
    }
}

void adam_step(std::vector<net::ParamRef>& params, AdamState& state, double lr) {
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state/parameter mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (state.m[i].size() != params[i].p->size())
            throw std::invalid_argument("adam_step: moment shape mismatch");
    for (const auto& ref : params)
        for (double g : ref.p->g)
            if (!std::isfinite(g))
                throw std::invalid_argument("adam_step: non-finite gradient");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        nn::ParamTensor& p = *params[i].p;
        std::vector<float>& mi = state.m[i];
        std::vector<float>& vi = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double g = p.g[j];
            const double m_new = state.beta1 * mi[j] + (1.0 - state.beta1) * g;
            const double v_new = state.beta2 * vi[j] + (1.0 - state.beta2) * g * g;
            mi[j] = static_cast<float>(m_new);
            vi[j] = static_cast<float>(v_new);
            const double m_hat = static_cast<double>(mi[j]) / bc1;
            const double v_hat = static_cast<double>(vi[j]) / bc2;
            p.v[j] = static_cast<float>(p.v[j] - lr * m_hat / (std::sqrt(v_hat) + state.floor));
        }
    }
}

Dataset load_dataset(const TrainConfig& cfg) {
    Dataset data;
    for (const auto& src : cfg.tasks) {
        if (src.manifest_path.empty())
            throw std::runtime_error("load_dataset: task " + std::to_string(src.task_id) +
                                     " has no manifest");
        const Manifest m = load_manifest(src.manifest_path);
        if (m.records.empty())
            throw std::runtime_error("load_dataset: empty manifest " + src.manifest_path);
        TaskData td;
        td.task_id = src.task_id;
        td.weight = src.weight;
        // mixed manifests list several tasks; keep only this task's records
        for (const auto& rec : m.records) {
            if (rec.task_id != src.task_id) continue;
            td.degraded.push_back(load_image(m.resolve(rec.degraded_path)));
            td.clean.push_back(load_image(m.resolve(rec.clean_path)));
            td.ids.push_back(rec.id);
            if (!td.degraded.back().same_shape(td.clean.back()))
                throw std::runtime_error("load_dataset: pair shape mismatch for id " + rec.id);
        }
        if (td.degraded.empty())
            throw std::runtime_error("load_dataset: no records for task " +
                                     std::to_string(src.task_id) + " in " + src.manifest_path);
        data.tasks.push_back(std::move(td));
    }
    return data;
}

namespace {

Tensor patch_to_tensor(const Image& img, int top, int left, int size, bool hflip, bool vflip) {
    Image p = crop_patch(img, top, left, size);
    if (hflip) p = flip_h(p);
    if (vflip) p = flip_v(p);
    return to_tensor(p);
}

} // namespace

std::vector<BatchItem> sample_batch(const TrainConfig& cfg, const Dataset& data, Rng& rng) {
    if (data.tasks.empty()) throw std::invalid_argument("sample_batch: empty dataset");
    double wsum = 0.0;
    for (const auto& t : data.tasks) wsum += t.weight;
    if (wsum <= 0.0) throw std::invalid_argument("sample_batch: non-positive weights");

    std::vector<BatchItem> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
        double pick = rng.uniform() * wsum;
        std::size_t ti = 0;
        for (; ti + 1 < data.tasks.size(); ++ti) {
            if (pick < data.tasks[ti].weight) break;
            pick -= data.tasks[ti].weight;
        }
        const TaskData& td = data.tasks[ti];
        const int ri = rng.uniform_int(static_cast<int>(td.degraded.size()));
        const Image& deg = td.degraded[ri];
        if (deg.height < cfg.patch_size || deg.width < cfg.patch_size)
            throw std::runtime_error("sample_batch: image smaller than patch_size");

        BatchItem item;
        item.task_id = td.task_id;
        item.record_index = ri;
        item.top = rng.uniform_int(deg.height - cfg.patch_size + 1);
        item.left = rng.uniform_int(deg.width - cfg.patch_size + 1);
        item.hflip = rng.bernoulli(0.5);
        item.vflip = rng.bernoulli(0.5);
        item.degraded =
            patch_to_tensor(deg, item.top, item.left, cfg.patch_size, item.hflip, item.vflip);
        item.clean = patch_to_tensor(td.clean[ri], item.top, item.left, cfg.patch_size,
                                     item.hflip, item.vflip);
        batch.push_back(std::move(item));
    }
    return batch;
}

double ProbePsnr::mean() const {
    double sum = 0.0;
    int n = 0;
    for (double v : {rain, snow, haze})
        if (!std::isnan(v)) {
            sum += v;
            ++n;
        }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

namespace {

constexpr std::uint64_t kSamplerSalt = 0x53414D504C453031ULL;

net::ModelConfig model_config_from(const TrainConfig& cfg, int in_channels) {
    net::ModelConfig mc;
    mc.in_channels = in_channels;
    mc.base_width = cfg.base_width;
    mc.tam_dim = cfg.tam_dim;
    mc.tam_hidden = cfg.tam_hidden;
    mc.num_tasks = 3;
    mc.scales = cfg.scales;
    if (cfg.variant == "no-tam") mc.variant.use_tam = false;
    else if (cfg.variant == "no-multiscale") mc.scales = {1};
    else if (cfg.variant == "one-stage") mc.variant.two_stage = false;
    else if (cfg.variant == "no-um") mc.variant.use_um = false;
    return mc;
}

double probe_task_psnr(const net::TwoStageModel& model, const TaskData& td, int count) {
    const int n = std::min<int>(count, static_cast<int>(td.degraded.size()));
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const Tensor restored = net::restore(model, to_tensor(td.degraded[i]), td.task_id);
        const auto p = metrics::psnr(to_image(restored), td.clean[i]);
        sum += p.identical ? 99.0 : p.db; // identical pairs saturate the probe
    }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

ProbePsnr probe_all(const net::TwoStageModel& model, const Dataset& data, int count) {
    ProbePsnr p;
    for (const auto& td : data.tasks) {
        const double v = probe_task_psnr(model, td, count);
        if (td.task_id == 0) p.rain = v;
        else if (td.task_id == 1) p.snow = v;
        else p.haze = v;
    }
    return p;
}

ProbePsnr probe_degraded(const Dataset& data, int count) {
    ProbePsnr p;
    for (const auto& td : data.tasks) {
        const int n = std::min<int>(count, static_cast<int>(td.degraded.size()));
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto r = metrics::psnr(td.degraded[i], td.clean[i]);
            sum += r.identical ? 99.0 : r.db;
        }
        const double v = n ? sum / n : std::numeric_limits<double>::quiet_NaN();
        if (td.task_id == 0) p.rain = v;
        else if (td.task_id == 1) p.snow = v;
        else p.haze = v;
    }
    return p;
}

void write_log_row(std::ofstream& log, long long step, double lr, double lc, double le, double lf,
                   double total, const ProbePsnr& probe) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%lld,%.9e,%.9e,%.9e,%.9e,%.9e,%.6f,%.6f,%.6f",
                  step, lr, lc, le, lf, total, probe.rain, probe.snow, probe.haze);
    log << buf << '\n';
    log.flush();
}

ckpt::CheckpointExtras make_extras(net::TwoStageModel& model, const AdamState& adam,
                                   long long step, const Rng& sampler) {
    ckpt::CheckpointExtras ex;
    ex.scalars["step"] = std::to_string(step);
    ex.scalars["adam_t"] = std::to_string(adam.t);
    ex.scalars["rng"] = std::to_string(sampler.state());
    auto refs = net::collect_params(model);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        ex.tensors["adam.m." + refs[i].name] = adam.m[i];
        ex.tensors["adam.v." + refs[i].name] = adam.v[i];
    }
    return ex;
}

void dump_diagnostics(const std::string& dir, const net::TwoStageCache& cache,
                      const Tensor& degraded) {
    fs::create_directories(dir);
    save_tensor_file(to_image(degraded), (fs::path(dir) / "batch_input.tnsr").string());
    if (cache.s1.mod_kernels.h > 0) {
        Tensor kt(cache.s1.mod_kernels.h, cache.s1.mod_kernels.w, engine::kTaps);
        kt.v = cache.s1.mod_kernels.taps;
        save_tensor_file(to_image(kt), (fs::path(dir) / "stage1_kernels.tnsr").string());
        const auto um = engine::uncertainty_map(cache.s1.mod_kernels);
        Tensor ut(um.h, um.w, 1);
        ut.v = um.score;
        save_tensor_file(to_image(ut), (fs::path(dir) / "stage1_um.tnsr").string());
    }
}

} // namespace

TrainResult train(const TrainConfig& cfg, const std::string& resume_dir) {
    cfg.validate();
    const Dataset data = load_dataset(cfg);
    const int in_channels = data.tasks.front().degraded.front().channels;
    for (const auto& td : data.tasks)
        for (const auto& img : td.degraded)
            if (img.channels != in_channels)
                throw std::runtime_error("train: mixed channel counts across dataset");

    fs::create_directories(cfg.out_dir);

    net::TwoStageModel model = net::make_model(model_config_from(cfg, in_channels), cfg.seed);
    Rng sampler(Rng(cfg.seed).fork(kSamplerSalt).state());
    AdamState adam;
    long long start_step = 0;

    if (!resume_dir.empty()) {
        auto loaded = ckpt::load_checkpoint(resume_dir);
        model = std::move(loaded.model);
        auto refs = net::collect_params(model);
        adam.init(refs);
        adam.t = std::stoll(loaded.extras.scalars.at("adam_t"));
        start_step = std::stoll(loaded.extras.scalars.at("step"));
        sampler.restore(std::stoull(loaded.extras.scalars.at("rng")));
        for (std::size_t i = 0; i < refs.size(); ++i) {
            adam.m[i] = loaded.extras.tensors.at("adam.m." + refs[i].name);
            adam.v[i] = loaded.extras.tensors.at("adam.v." + refs[i].name);
        }
    } else {
        adam.init(net::collect_params(model));
    }

    auto registry = net::collect_params(model);
    const loss::LossWeights weights;

    const std::string log_path = (fs::path(cfg.out_dir) / "loss_log.csv").string();
    std::ofstream log(log_path);
    if (!log) throw std::runtime_error("train: cannot open log " + log_path);
    log << kLossLogHeader << '\n';

    TrainResult result;
    result.log_path = log_path;
    result.degraded_probe = probe_degraded(data, cfg.probe_count);

    int consecutive_bad = 0;
    for (long long step = start_step + 1; step <= cfg.total_steps; ++step) {
        const double lr = cosine_lr(step - 1, cfg);
        const auto batch = sample_batch(cfg, data, sampler);
        net::zero_grads(model);

        double sum_c = 0, sum_e = 0, sum_f = 0, sum_total = 0;
        bool step_bad = false;
        const double inv_b = 1.0 / static_cast<double>(batch.size());

        for (const auto& item : batch) {
            net::TwoStageCache cache;
            try {
                const net::TwoStageOut out =
                    net::two_stage_forward(model, item.degraded, item.task_id, &cache);
                std::vector<const Tensor*> outputs;
                outputs.push_back(&out.j1);
                if (model.cfg.variant.two_stage) outputs.push_back(&out.j2);
                loss::TotalLoss tl = loss::total_loss(outputs, item.clean, weights);
                if (!std::isfinite(tl.total)) {
                    step_bad = true;
                    dump_diagnostics((fs::path(cfg.out_dir) / "diagnostics").string(), cache,
                                     item.degraded);
                    break;
                }
                sum_c += tl.l_c * inv_b;
                sum_e += tl.l_e * inv_b;
                sum_f += tl.l_f * inv_b;
                sum_total += tl.total * inv_b;
                for (auto& g : tl.grads)
                    for (double& v : g.v) v *= inv_b;
                static const Tensor kNoGrad;
                const Tensor& d_j2 = model.cfg.variant.two_stage ? tl.grads[1] : kNoGrad;
                net::two_stage_backward(model, item.task_id, cache, tl.grads[0], d_j2);
            } catch (const std::runtime_error&) {
                // non-finite activations count like a non-finite loss
                step_bad = true;
                dump_diagnostics((fs::path(cfg.out_dir) / "diagnostics").string(), cache,
                                 item.degraded);
                break;
            }
        }

        if (step_bad) {
            if (++consecutive_bad >= 3)
                throw std::runtime_error(
                    "train: non-finite loss three steps in a row; diagnostics dumped to " +
                    (fs::path(cfg.out_dir) / "diagnostics").string());
            continue;
        }
        consecutive_bad = 0;

        // global-norm clip, fixed accumulation order over the registry
        double norm_sq = 0.0;
        for (const auto& ref : registry)
            for (double g : ref.p->g) norm_sq += g * g;
        if (!std::isfinite(norm_sq)) {
            std::cerr << "train: step " << step << " rejected (non-finite gradient)\n";
            continue;
        }
        if (cfg.grad_clip > 0.0 && norm_sq > cfg.grad_clip * cfg.grad_clip) {
            const double scale = cfg.grad_clip / std::sqrt(norm_sq);
            for (auto& ref : registry)
                for (double& g : ref.p->g) g *= scale;
        }
        adam_step(registry, adam, lr);

        if (step % cfg.log_every == 0 || step == cfg.total_steps) {
            const ProbePsnr probe = probe_all(model, data, cfg.probe_count);
            write_log_row(log, step, lr, sum_c, sum_e, sum_f, sum_total, probe);
        }
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 &&
            step != cfg.total_steps) {
            const auto ex = make_extras(model, adam, step, sampler);
            ckpt::save_checkpoint(
                (fs::path(cfg.out_dir) / ("ckpt_" + std::to_string(step))).string(), model, &ex);
        }
    }

    result.final_probe = probe_all(model, data, cfg.probe_count);
    result.steps_run = cfg.total_steps - start_step;
    result.checkpoint_dir = (fs::path(cfg.out_dir) / "ckpt_final").string();
    const auto ex = make_extras(model, adam, cfg.total_steps, sampler);
    ckpt::save_checkpoint(result.checkpoint_dir, model, &ex);
    return result;
}

} // namespace opir::train
