#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wavesr/config.hpp"
#include "wavesr/data.hpp"
#include "wavesr/loss.hpp"
#include "wavesr/model.hpp"

namespace wsr {

/// Adam with bias correction. Moments live alongside the parameters and are
/// stored in checkpoints as "optim.m.<name>" / "optim.v.<name>".
class Adam {
public:
    Adam(std::vector<std::pair<std::string, Tensor>> params, float beta1, float beta2, float eps);

    void step(float lr);
    void zero_grad();
    long long steps() const { return t_; }

    void save_state(Checkpoint& ck) const;
    /// Throws FormatError if a moment tensor is missing or mis-shaped.
    void load_state(const Checkpoint& ck);

private:
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<std::vector<float>> m_, v_;
    float beta1_, beta2_, eps_;
    long long t_ = 0;
};

/// Wires model outputs and the example targets into the loss terms.
LossInputs make_loss_inputs(const ModelOutputs& out, const TrainingExample& ex, const ModelConfig& cfg);

struct StepLog {
    int step = 0;  // 1-based
    LossReport loss;
};

/// `step total l_w l_i l_s l_m l_t`
std::string format_step_log(const StepLog& s);

/// One optimiser step = `batch` examples, gradients averaged. Example
/// sampling for step k depends only on (seed, k), so a resumed run replays
/// the same batches as an uninterrupted one.
class Trainer {
public:
    Trainer(const RunConfig& cfg, std::vector<std::vector<FrameRecord>> scenes);

    StepLog step();
    int steps_done() const { return step_; }
    float learning_rate(int step) const;

    Model& model() { return model_; }
    const Model& model() const { return model_; }
    Checkpoint checkpoint() const;
    /// Restores parameters, Adam moments and the step counter.
    void resume(const Checkpoint& ck);

private:
    RunConfig cfg_;
    std::vector<std::vector<FrameRecord>> scenes_;
    Model model_;
    Adam opt_;
    int step_ = 0;
};

/// Scenes of one split, loaded in manifest order. Throws ConfigError if the
/// split is empty.
std::vector<std::vector<FrameRecord>> load_split(const std::filesystem::path& root, Split split);

struct TrainOutcome {
    std::vector<StepLog> log;  // steps run in this call
    std::filesystem::path checkpoint;
};

/// Trains on the train split of cfg.data_dir up to cfg.train.steps, writing
/// out/loss_log.txt and out/checkpoint.wdss. With `resume`, continues from
/// that checkpoint. Throws NumericError on a non-finite loss.
TrainOutcome run_training(const RunConfig& cfg, const std::optional<std::filesystem::path>& resume,
                          std::ostream* progress = nullptr);

inline constexpr const char* kCheckpointFile = "checkpoint.wdss";
inline constexpr const char* kLossLogFile = "loss_log.txt";

}  // namespace wsr
