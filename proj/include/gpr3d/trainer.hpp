#pragma once

#include <string>
#include <vector>

#include "gpr3d/adam.hpp"
#include "gpr3d/checkpoint.hpp"
#include "gpr3d/dataset.hpp"
#include "gpr3d/network.hpp"

namespace gpr3d {

enum class LossKind { Mse, Mae };
enum class InputKind { Noisy, Clean };
enum class TargetKind { Clean, Map };

/// What a training stage consumes and optimizes.
struct TrainTask {
  InputKind input = InputKind::Noisy;
  TargetKind target = TargetKind::Clean;
  LossKind loss = LossKind::Mse;
};

/// Step 1: noisy C-scan -> clean C-scan under MSE.
inline TrainTask denoiser_task() { return {InputKind::Noisy, TargetKind::Clean, LossKind::Mse}; }
/// Step 2: C-scan (noise-free by default) -> permittivity map under MAE.
inline TrainTask inverter_task(InputKind input = InputKind::Clean) {
  return {input, TargetKind::Map, LossKind::Mae};
}

/// Learning-rate / epoch schedule shared by pre-training and fine-tuning.
struct TrainSchedule {
  double lr0 = 0.001;
  double decay_factor = 0.98;
  int epochs = 100;
  int batch_size = 2;
  double split = 0.9;  // train fraction
  std::uint64_t seed = 7;
};

/// Multiplies lr by decay_factor when the last epoch's training loss shows
/// no drop (equality counts as no drop); otherwise returns lr unchanged.
double update_lr(double lr, const std::vector<double>& train_loss_history, double decay_factor);

struct EpochStats {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_loss = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  Network<float> best_net;  // snapshot at the lowest validation loss
  AdamState<float> best_adam;
  int best_epoch = 0;
  double best_val_loss = 0;
  double final_lr = 0;
};

/// Epoch loop over shuffled mini-batches with Adam, the conditional LR
/// decay, and best-validation checkpointing. Writes a per-epoch CSV
/// (epoch, lr, train_loss, val_loss) when log_csv is non-empty.
TrainResult train_stage(Network<float>& net, const TrainTask& task, const Manifest& manifest,
                        const std::string& manifest_dir, const TrainSchedule& schedule,
                        const std::string& log_csv = "");

/// Step 3: rebuilds the checkpointed network, re-trains it on a new
/// manifest with the fine-tuning schedule (fresh optimizer state), and
/// returns the new best-validation checkpoint.
Checkpoint fine_tune(const Checkpoint& source, const TrainTask& task, const Manifest& manifest,
                     const std::string& manifest_dir, const TrainSchedule& schedule,
                     const std::string& dataset_fingerprint, const std::string& log_csv = "");

/// Assembles the standard checkpoint for a finished stage.
Checkpoint stage_checkpoint(const TrainResult& result, nlohmann::json arch,
                            const std::string& dataset_fingerprint);

/// Mean voxel value of the chosen target volumes across a manifest; used
/// to warm-start the inverter's output bias at the map mean.
double manifest_target_mean(const Manifest& manifest, const std::string& manifest_dir,
                            TargetKind target);

}  // namespace gpr3d
