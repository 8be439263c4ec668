#include "wavesr/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "wavesr/error.hpp"
#include "wavesr/ops.hpp"
#include "wavesr/random.hpp"

namespace wsr {

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, float beta1, float beta2, float eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [name, p] : params_) {
        m_.emplace_back(p.numel(), 0.0f);
        v_.emplace_back(p.numel(), 0.0f);
    }
}

void Adam::step(float lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(static_cast<double>(beta1_), static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(static_cast<double>(beta2_), static_cast<double>(t_));
    const float step_size = static_cast<float>(lr / c1);
    const float v_corr = static_cast<float>(1.0 / std::sqrt(c2));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i].second;
        if (!p.has_grad()) continue;
        auto g = p.grad();
        auto w = p.mutable_data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = beta1_ * m[k] + (1.0f - beta1_) * g[k];
            v[k] = beta2_ * v[k] + (1.0f - beta2_) * g[k] * g[k];
            w[k] -= step_size * m[k] / (std::sqrt(v[k]) * v_corr + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
}

void Adam::save_state(Checkpoint& ck) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& [name, p] = params_[i];
        ck.tensors.emplace_back("optim.m." + name, Tensor(p.shape(), m_[i]));
        ck.tensors.emplace_back("optim.v." + name, Tensor(p.shape(), v_[i]));
    }
    ck.extra["optim.t"] = std::to_string(t_);
}

void Adam::load_state(const Checkpoint& ck) {
    auto find = [&](const std::string& name, const Shape& shape) -> const Tensor& {
        for (const auto& [n, t] : ck.tensors) {
            if (n == name) {
                if (t.shape() != shape) throw FormatError("optimiser tensor '" + name + "' has the wrong shape", 0);
                return t;
            }
        }
        throw FormatError("checkpoint has no optimiser tensor '" + name + "'", 0);
    };
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& [name, p] = params_[i];
        auto m = find("optim.m." + name, p.shape()).data();
        auto v = find("optim.v." + name, p.shape()).data();
        m_[i].assign(m.begin(), m.end());
        v_[i].assign(v.begin(), v.end());
    }
    const auto it = ck.extra.find("optim.t");
    if (it == ck.extra.end()) throw FormatError("checkpoint has no optimiser step count", 0);
    t_ = std::stoll(it->second);
}

LossInputs make_loss_inputs(const ModelOutputs& out, const TrainingExample& ex, const ModelConfig& cfg) {
    LossInputs li;
    if (cfg.wavelet) {
        li.pred_coeffs = out.coeffs;
        li.target_coeffs = ex.target_coeffs;
        li.spec = *cfg.wavelet;
        li.crop = cfg.wavelet->transform == Transform::swt ? 1 : 0;
    }
    li.pred_image = out.image;
    li.target_image = ex.target;
    li.mask_logits = out.mask_logits;
    li.mask_target = ex.masks.spatial;
    li.prev_warped = ex.l_prev_warped;
    li.phi_temporal = ex.masks.temporal;
    return li;
}

std::string format_step_log(const StepLog& s) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f %.6f %.6f", s.step, s.loss.total, s.loss.wavelet,
                  s.loss.image, s.loss.ssim, s.loss.mask, s.loss.temporal);
    return buf;
}

namespace {

ModelConfig seeded(ModelConfig m, std::uint64_t seed) {
    m.seed = seed;
    return m;
}

}  // namespace

Trainer::Trainer(const RunConfig& cfg, std::vector<std::vector<FrameRecord>> scenes)
    : cfg_(cfg),
      scenes_(std::move(scenes)),
      model_((cfg.validate(), seeded(cfg.model, cfg.require_seed()))),
      opt_(model_.parameters(), cfg.train.beta1, cfg.train.beta2, cfg.train.eps) {
    if (scenes_.empty()) throw ConfigError("training needs at least one scene");
}

float Trainer::learning_rate(int step) const {
    if (!cfg_.train.cosine || cfg_.train.steps <= 1) return cfg_.train.lr;
    const double progress = static_cast<double>(step) / (cfg_.train.steps - 1);
    return static_cast<float>(cfg_.train.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0))));
}

StepLog Trainer::step() {
    const int k = step_ + 1;
    std::mt19937_64 rng(derive_seed(cfg_.require_seed(), {0x7472u, static_cast<std::uint64_t>(k)}));
    const SamplerConfig sampler = cfg_.sampler();
    const int B = cfg_.train.batch;

    StepLog log;
    log.step = k;
    std::vector<std::string> batch_ids;
    opt_.zero_grad();
    for (int b = 0; b < B; ++b) {
        const TrainingExample ex = sample_training_example(scenes_, rng, sampler);
        batch_ids.push_back(ex.scene_id + "/frame " + std::to_string(ex.frame_index));
        const ModelOutputs out = model_.forward({ex.l_lr, ex.g_hr, ex.l_prev_warped, ex.masks, ex.scale});
        LossReport r;
        const Tensor loss = total_loss(make_loss_inputs(out, ex, cfg_.model), cfg_.loss, &r);
        if (!std::isfinite(r.total)) {
            std::string ids;
            for (std::size_t i = 0; i < batch_ids.size(); ++i) ids += (i ? ", " : "") + batch_ids[i];
            throw NumericError("non-finite loss at step " + std::to_string(k) + ", batch index " + std::to_string(b) +
                               " (" + ids + ")");
        }
        backward(scale(loss, 1.0f / static_cast<float>(B)));
        log.loss.wavelet += r.wavelet / B;
        log.loss.image += r.image / B;
        log.loss.ssim += r.ssim / B;
        log.loss.mask += r.mask / B;
        log.loss.temporal += r.temporal / B;
        log.loss.total += r.total / B;
    }
    opt_.step(learning_rate(step_));
    opt_.zero_grad();
    step_ = k;
    return log;
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint ck;
    ck.config = model_.config();
    for (const auto& [name, p] : model_.parameters()) ck.tensors.emplace_back(name, p.detach());
    opt_.save_state(ck);
    ck.extra["train.step"] = std::to_string(step_);
    ck.extra["train.seed"] = std::to_string(cfg_.require_seed());
    return ck;
}

void Trainer::resume(const Checkpoint& ck) {
    if (ck.config.to_text() != model_.config().to_text()) {
        throw ConfigError("checkpoint model config does not match the run config");
    }
    const auto seed = ck.extra.find("train.seed");
    if (seed != ck.extra.end() && seed->second != std::to_string(cfg_.require_seed())) {
        throw ConfigError("checkpoint was trained with seed " + seed->second + ", run config has " +
                          std::to_string(cfg_.require_seed()));
    }
    const auto step = ck.extra.find("train.step");
    if (step == ck.extra.end()) throw FormatError("checkpoint has no training step", 0);
    load_parameters(model_, ck);
    opt_.load_state(ck);
    step_ = std::stoi(step->second);
}

std::vector<std::vector<FrameRecord>> load_split(const std::filesystem::path& root, Split split) {
    const SplitManifest manifest = read_manifest(root / kManifestName);
    std::vector<std::vector<FrameRecord>> scenes;
    for (const std::string& id : manifest.scenes_in(split)) scenes.push_back(load_scene(root, id));
    if (scenes.empty()) throw ConfigError("dataset '" + root.string() + "' has no " + to_string(split) + " scenes");
    return scenes;
}

TrainOutcome run_training(const RunConfig& cfg, const std::optional<std::filesystem::path>& resume,
                          std::ostream* progress) {
    cfg.validate();
    Trainer trainer(cfg, load_split(cfg.data_dir, Split::train));
    if (resume) trainer.resume(load_checkpoint(*resume));

    std::filesystem::create_directories(cfg.out);
    TrainOutcome outcome;
    outcome.checkpoint = cfg.out / kCheckpointFile;
    const auto log_path = cfg.out / kLossLogFile;

    // Keep the log consistent with the checkpoint: drop lines past the resume point.
    std::vector<std::string> kept;
    if (resume) {
        std::ifstream old(log_path);
        std::string line;
        while (std::getline(old, line)) {
            if (line.empty()) continue;
            if (line[0] == '#' || std::stoi(line) <= trainer.steps_done()) kept.push_back(line);
        }
    }
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw DataError("cannot write '" + log_path.string() + "'");
    if (kept.empty()) log << "# step total l_w l_i l_s l_m l_t\n";
    for (const auto& line : kept) log << line << '\n';

    while (trainer.steps_done() < cfg.train.steps) {
        const StepLog s = trainer.step();
        outcome.log.push_back(s);
        log << format_step_log(s) << '\n' << std::flush;
        if (progress) *progress << "step " << format_step_log(s) << '\n' << std::flush;
        if (cfg.train.checkpoint_every > 0 && s.step % cfg.train.checkpoint_every == 0) {
            save_checkpoint(outcome.checkpoint, trainer.checkpoint());
        }
    }
    save_checkpoint(outcome.checkpoint, trainer.checkpoint());
    return outcome;
}

}  // namespace wsr
