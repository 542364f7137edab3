#include "gpr3d/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "gpr3d/losses.hpp"
#include "gpr3d/volume_io.hpp"

namespace gpr3d {

double update_lr(double lr, const std::vector<double>& hist, double decay_factor) {
  require(hist.size() >= 2, "update_lr: needs at least two recorded epoch losses");
  const double last = hist[hist.size() - 1], prev = hist[hist.size() - 2];
  return last >= prev ? decay_factor * lr : lr;
}

namespace {

struct Sample {
  Tensor<float> input;
  Tensor<float> target;
};

std::vector<Sample> load_samples(const TrainTask& task, const Manifest& manifest,
                                 const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<Sample> out;
  for (const ManifestRecord& rec : manifest.records) {
    const std::string& in_name = task.input == InputKind::Noisy ? rec.noisy_path : rec.clean_path;
    const std::string& tg_name = task.target == TargetKind::Clean ? rec.clean_path : rec.map_path;
    Sample s;
    s.input = read_volume<float>((fs::path(dir) / in_name).string());
    s.target = read_volume<float>((fs::path(dir) / tg_name).string());
    out.push_back(std::move(s));
  }
  return out;
}

void fisher_yates(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
}

Tensor<float> stack_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& order,
                          std::size_t first, std::size_t count, bool input) {
  const Tensor<float>& ref = input ? samples[order[first]].input : samples[order[first]].target;
  Tensor<float> out({count, 1, ref.dim(0), ref.dim(1), ref.dim(2)});
  const std::size_t vol = ref.numel();
  for (std::size_t b = 0; b < count; ++b) {
    const Tensor<float>& src = input ? samples[order[first + b]].input : samples[order[first + b]].target;
    require(src.numel() == vol, "train_stage: samples have inconsistent shapes");
    std::copy(src.data.begin(), src.data.end(), out.data.begin() + static_cast<long>(b * vol));
  }
  return out;
}

float batch_loss(LossKind kind, const Tensor<float>& pred, const Tensor<float>& truth,
                 Tensor<float>* dpred) {
  return kind == LossKind::Mse ? loss_mse(pred, truth, dpred) : loss_mae(pred, truth, dpred);
}

}  // namespace

TrainResult train_stage(Network<float>& net, const TrainTask& task, const Manifest& manifest,
                        const std::string& manifest_dir, const TrainSchedule& schedule,
                        const std::string& log_csv) {
  require(!manifest.records.empty(), "train_stage: empty manifest");
  require(schedule.split > 0 && schedule.split < 1, "train_stage: split must be in (0, 1)");
  require(schedule.batch_size >= 1, "train_stage: batch_size must be >= 1");
  require(schedule.epochs >= 0, "train_stage: negative epoch count");

  const std::vector<Sample> samples = load_samples(task, manifest, manifest_dir);
  const std::size_t n = samples.size();
  const std::size_t n_train = static_cast<std::size_t>(schedule.split * static_cast<double>(n));
  require(n_train >= 1 && n_train < n,
          "train_stage: split " + std::to_string(schedule.split) + " leaves no training or no validation samples for " +
              std::to_string(n) + " records");

  Rng rng(schedule.seed);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng split_rng = rng.derive(0);
  fisher_yates(idx, split_rng);
  std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> val_idx(idx.begin() + static_cast<long>(n_train), idx.end());

  TrainResult result;
  result.best_net = net;
  AdamState<float> adam = AdamState<float>::for_network(net);
  result.best_adam = adam;
  result.best_epoch = 0;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  double lr = schedule.lr0;
  std::vector<double> train_hist;

  std::ofstream log;
  if (!log_csv.empty()) {
    log.open(log_csv, std::ios::trunc);
    require(static_cast<bool>(log), "train_stage: cannot write log '" + log_csv + "'");
    log << "epoch,lr,train_loss,val_loss\n";
    log.precision(12);
  }

  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    Rng epoch_rng = rng.derive(static_cast<std::uint64_t>(epoch));
    fisher_yates(train_idx, epoch_rng);

    double loss_sum = 0;
    for (std::size_t first = 0; first < n_train; first += static_cast<std::size_t>(schedule.batch_size)) {
      const std::size_t bs = std::min(static_cast<std::size_t>(schedule.batch_size), n_train - first);
      const Tensor<float> input = stack_batch(samples, train_idx, first, bs, true);
      const Tensor<float> target = stack_batch(samples, train_idx, first, bs, false);
      ForwardTrace<float> trace;
      Tensor<float> pred = forward(net, input, Mode::Train, &trace);
      Tensor<float> dpred(pred.shape);
      const float L = batch_loss(task.loss, pred, target, &dpred);
      require(std::isfinite(static_cast<double>(L)),
              "train_stage: non-finite training loss at epoch " + std::to_string(epoch));
      net.zero_grads();
      backward(net, input, trace, dpred);
      adam_step(net, adam, static_cast<float>(lr));
      loss_sum += static_cast<double>(L) * static_cast<double>(bs);
    }
    const double train_loss = loss_sum / static_cast<double>(n_train);

    double val_sum = 0;
    for (std::size_t vi : val_idx) {
      Tensor<float> input = samples[vi].input;
      input.shape = {1, 1, samples[vi].input.dim(0), samples[vi].input.dim(1), samples[vi].input.dim(2)};
      Tensor<float> target = samples[vi].target;
      target.shape = input.shape;
      Tensor<float> pred = forward(net, input, Mode::Infer);
      val_sum += static_cast<double>(batch_loss(task.loss, pred, target, nullptr));
    }
    const double val_loss = val_sum / static_cast<double>(val_idx.size());
    require(std::isfinite(val_loss),
            "train_stage: non-finite validation loss at epoch " + std::to_string(epoch));

    result.history.push_back({epoch, lr, train_loss, val_loss});
    if (log.is_open()) log << epoch << ',' << lr << ',' << train_loss << ',' << val_loss << '\n';

    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.best_net = net;
      result.best_adam = adam;
    }
    train_hist.push_back(train_loss);
    if (train_hist.size() >= 2) lr = update_lr(lr, train_hist, schedule.decay_factor);
  }

  result.final_lr = lr;
  if (schedule.epochs == 0) result.best_val_loss = std::numeric_limits<double>::quiet_NaN();
  return result;
}

Checkpoint stage_checkpoint(const TrainResult& result, nlohmann::json arch,
                            const std::string& dataset_fingerprint) {
  arch["epoch"] = result.best_epoch;
  arch["lr"] = result.final_lr;
  arch["best_val_loss"] = result.best_val_loss;
  if (!result.history.empty()) {
    arch["train_loss"] = result.history.back().train_loss;
    arch["val_loss"] = result.history.back().val_loss;
  }
  arch["dataset_fingerprint"] = dataset_fingerprint;
  return checkpoint_from_network(result.best_net, std::move(arch), &result.best_adam);
}

double manifest_target_mean(const Manifest& manifest, const std::string& manifest_dir,
                            TargetKind target) {
  namespace fs = std::filesystem;
  require(!manifest.records.empty(), "manifest_target_mean: empty manifest");
  double sum = 0;
  std::size_t count = 0;
  for (const ManifestRecord& rec : manifest.records) {
    const std::string& name = target == TargetKind::Clean ? rec.clean_path : rec.map_path;
    const Tensor<float> t = read_volume<float>((fs::path(manifest_dir) / name).string());
    for (float v : t.data) sum += static_cast<double>(v);
    count += t.numel();
  }
  return sum / static_cast<double>(count);
}

Checkpoint fine_tune(const Checkpoint& source, const TrainTask& task, const Manifest& manifest,
                     const std::string& manifest_dir, const TrainSchedule& schedule,
                     const std::string& dataset_fingerprint, const std::string& log_csv) {
  Network<float> net = network_from_checkpoint(source);  // fresh optimizer state
  TrainResult result = train_stage(net, task, manifest, manifest_dir, schedule, log_csv);
  nlohmann::json arch;
  arch["net"] = source.header.at("net");
  arch["fine_tuned_from"] = source.header.value("dataset_fingerprint", "");
  return stage_checkpoint(result, std::move(arch), dataset_fingerprint);
}

}  // namespace gpr3d
