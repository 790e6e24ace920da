#include "maulab/vq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "maulab/checkpoint.hpp"
#include "maulab/io.hpp"
#include "maulab/parallel.hpp"

namespace maulab {

void VQConfig::validate() const {
  if (codebook_size < 2) fail(ErrorKind::Config, "codebook_size must be >= 2");
  if (code_dim < 1) fail(ErrorKind::Config, "code_dim must be >= 1");
  if (temperature <= 0.0) fail(ErrorKind::Config, "temperature must be > 0");
  if (downsample_stride < 1) fail(ErrorKind::Config, "downsample_stride must be >= 1");
  if (diversity_weight < 0.0) fail(ErrorKind::Config, "diversity_weight must be >= 0");
  if (frame_dim < 1) fail(ErrorKind::Config, "frame_dim must be >= 1");
  if (width < heads || width % heads != 0)
    fail(ErrorKind::Config, "width must be a positive multiple of heads");
}

nlohmann::json VQConfig::to_json() const {
  return {
      {"codebook_size", codebook_size},
      {"code_dim", code_dim},
      {"temperature", temperature},
      {"downsample_stride", downsample_stride},
      {"diversity_weight", diversity_weight},
      {"frame_dim", frame_dim},
      {"width", width},
      {"ff_dim", ff_dim},
      {"heads", heads},
      {"encoder_blocks", encoder_blocks},
      {"decoder_blocks", decoder_blocks},
      {"resample_kernel", resample_kernel},
      {"enc_dw_kernel", enc_dw_kernel},
      {"dec_dw_kernel", dec_dw_kernel},
      {"anneal_temperature", anneal_temperature},
      {"anneal_rate", anneal_rate},
      {"min_temperature", min_temperature},
  };
}

VQConfig VQConfig::from_json(const nlohmann::json& j) {
  VQConfig c;
  c.codebook_size = j.at("codebook_size").get<int64_t>();
  c.code_dim = j.at("code_dim").get<int64_t>();
  c.temperature = j.at("temperature").get<double>();
  c.downsample_stride = j.at("downsample_stride").get<int>();
  c.diversity_weight = j.at("diversity_weight").get<double>();
  c.frame_dim = j.at("frame_dim").get<int64_t>();
  c.width = j.at("width").get<int64_t>();
  c.ff_dim = j.at("ff_dim").get<int64_t>();
  c.heads = j.at("heads").get<int>();
  c.encoder_blocks = j.at("encoder_blocks").get<int>();
  c.decoder_blocks = j.at("decoder_blocks").get<int>();
  c.resample_kernel = j.at("resample_kernel").get<int>();
  c.enc_dw_kernel = j.at("enc_dw_kernel").get<int>();
  c.dec_dw_kernel = j.at("dec_dw_kernel").get<int>();
  c.anneal_temperature = j.at("anneal_temperature").get<bool>();
  c.anneal_rate = j.at("anneal_rate").get<double>();
  c.min_temperature = j.at("min_temperature").get<double>();
  return c;
}

GumbelSoftmaxResult gumbel_softmax_with_noise(const Tensor& logits, double tau,
                                              const Tensor& noise, bool hard) {
  if (tau <= 0.0) fail(ErrorKind::Contract, "gumbel_softmax requires tau > 0");
  if (logits.shape() != noise.shape())
    fail(ErrorKind::InvalidArgument, "gumbel noise shape mismatch");
  Tensor perturbed = ops::mul(ops::add(logits, noise), 1.0 / tau);
  GumbelSoftmaxResult result;
  Tensor soft = ops::softmax(perturbed);
  int64_t v = soft.shape().back();
  int64_t rows = soft.numel() / v;
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = &soft.data()[r * v];
    result.hard_indices.push_back(
        static_cast<int32_t>(std::max_element(row, row + v) - row));
  }
  result.assignment = hard ? ops::straight_through_onehot(soft) : soft;
  return result;
}

GumbelSoftmaxResult gumbel_softmax(const Tensor& logits, double tau, Rng& rng, bool hard) {
  std::vector<double> noise(static_cast<size_t>(logits.numel()));
  for (double& g : noise) g = rng.gumbel();
  return gumbel_softmax_with_noise(logits, tau,
                                   Tensor::from_data(logits.shape(), std::move(noise)), hard);
}

Tensor diversity_loss(const Tensor& soft_assignments) {
  if (soft_assignments.rank() != 2 || soft_assignments.dim(0) < 1)
    fail(ErrorKind::Contract, "diversity_loss needs at least one assignment row");
  int64_t v = soft_assignments.dim(1);
  Tensor mean_assignment = ops::mean_axis0(soft_assignments);
  Tensor entropy = ops::neg(ops::plogp_sum(mean_assignment));
  Tensor perplexity = ops::exp(entropy);
  // (V − exp(entropy)) / V
  return ops::add(ops::mul(perplexity, -1.0 / static_cast<double>(v)), 1.0);
}

double assignment_perplexity(const Tensor& soft_assignments) {
  int64_t rows = soft_assignments.dim(0), v = soft_assignments.dim(1);
  std::vector<double> mean(static_cast<size_t>(v), 0.0);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t i = 0; i < v; ++i) mean[i] += soft_assignments.data()[r * v + i];
  double entropy = 0.0;
  for (double& p : mean) {
    p /= static_cast<double>(rows);
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

VQModel::Block VQModel::make_block(const std::string& prefix, int dw_kernel, Rng& rng) {
  Block b;
  b.dw_kernel = dw_kernel;
  b.dw_w = store_.xavier(prefix + ".dw.w", {cfg_.width, dw_kernel}, dw_kernel, dw_kernel, rng);
  b.dw_b = store_.zeros(prefix + ".dw.b", {cfg_.width});
  b.ln1 = nn::make_layer_norm(store_, prefix + ".ln1", cfg_.width);
  b.ln2 = nn::make_layer_norm(store_, prefix + ".ln2", cfg_.width);
  b.ln3 = nn::make_layer_norm(store_, prefix + ".ln3", cfg_.width);
  b.attn = nn::make_attention(store_, prefix + ".attn", cfg_.width, rng);
  b.ff = nn::make_feed_forward(store_, prefix + ".ff", cfg_.width, cfg_.ff_dim, rng);
  return b;
}

Tensor VQModel::run_block(const Block& block, const Tensor& x) const {
  Tensor h = ops::add(
      x, ops::depthwise_conv1d(nn::layer_norm(x, block.ln1), block.dw_w, block.dw_b,
                               (block.dw_kernel - 1) / 2));
  Tensor normed = nn::layer_norm(h, block.ln2);
  h = ops::add(h, nn::attention(normed, normed, block.attn, cfg_.heads).out);
  return ops::add(h, nn::feed_forward(nn::layer_norm(h, block.ln3), block.ff));
}

VQModel::VQModel(const VQConfig& cfg, Rng init_rng) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = init_rng;
  in_proj_w_ = store_.xavier("enc.in.w", {cfg_.frame_dim, cfg_.width}, cfg_.frame_dim,
                             cfg_.width, rng);
  in_proj_b_ = store_.zeros("enc.in.b", {cfg_.width});
  for (int i = 0; i < cfg_.encoder_blocks; ++i)
    enc_blocks_.push_back(make_block("enc.block" + std::to_string(i), cfg_.enc_dw_kernel, rng));
  down_ = nn::make_conv(store_, "enc.down", cfg_.width, cfg_.width, cfg_.resample_kernel, rng);
  to_logits_ = nn::make_linear(store_, "enc.logits", cfg_.width, cfg_.codebook_size, rng);
  codebook_ = store_.normal("vq.codebook", {cfg_.codebook_size, cfg_.code_dim},
                            1.0 / std::sqrt(static_cast<double>(cfg_.code_dim)), rng);
  from_code_ = nn::make_linear(store_, "dec.in", cfg_.code_dim, cfg_.width, rng);
  up_ = nn::make_conv(store_, "dec.up", cfg_.width, cfg_.width, cfg_.resample_kernel, rng);
  for (int i = 0; i < cfg_.decoder_blocks; ++i)
    dec_blocks_.push_back(make_block("dec.block" + std::to_string(i), cfg_.dec_dw_kernel, rng));
  out_proj_ = nn::make_linear(store_, "dec.out", cfg_.width, cfg_.frame_dim, rng);
}

int64_t VQModel::unit_length_for(int64_t n_frames) const {
  int pad = (cfg_.resample_kernel - 1) / 2;
  return ops::conv1d_output_length(n_frames, cfg_.resample_kernel, cfg_.downsample_stride, pad);
}

VQModel::ForwardResult VQModel::forward(const Tensor& frames, Rng* gumbel_rng, double tau) const {
  if (frames.rank() != 2 || frames.dim(0) < 1)
    fail(ErrorKind::Contract, "vq forward requires a non-empty [T, F] frame matrix");
  if (frames.dim(1) != cfg_.frame_dim)
    fail(ErrorKind::InvalidArgument,
         "frame width " + std::to_string(frames.dim(1)) + " does not match configured " +
             std::to_string(cfg_.frame_dim));
  int64_t n_frames = frames.dim(0);
  int pad = (cfg_.resample_kernel - 1) / 2;

  Tensor h = ops::add(ops::matmul(frames, in_proj_w_), in_proj_b_);
  for (const Block& b : enc_blocks_) h = run_block(b, h);
  h = ops::conv1d(h, down_.w, down_.b, cfg_.downsample_stride, pad);
  Tensor logits = nn::linear(h, to_logits_);

  ForwardResult result;
  result.unit_logits = logits;
  Tensor assignment;
  if (gumbel_rng) {
    GumbelSoftmaxResult gs = gumbel_softmax(logits, tau, *gumbel_rng, true);
    result.soft_assignment = ops::softmax(ops::mul(logits, 1.0 / tau));
    result.units = std::move(gs.hard_indices);
    assignment = gs.assignment;
  } else {
    // Inference path: noiseless argmax, still one-hot through the codebook.
    Tensor soft = ops::softmax(ops::mul(logits, 1.0 / tau));
    result.soft_assignment = soft;
    assignment = ops::straight_through_onehot(soft);
    int64_t v = cfg_.codebook_size;
    for (int64_t t = 0; t < assignment.dim(0); ++t) {
      const double* row = &assignment.data()[t * v];
      result.units.push_back(static_cast<int32_t>(std::max_element(row, row + v) - row));
    }
  }

  Tensor quantized = ops::matmul(assignment, codebook_);
  Tensor g = nn::linear(quantized, from_code_);
  g = ops::conv1d_transpose(g, up_.w, up_.b, cfg_.downsample_stride, pad,
                            cfg_.downsample_stride - 1);
  for (const Block& b : dec_blocks_) g = run_block(b, g);
  Tensor recon = nn::linear(g, out_proj_);
  if (recon.dim(0) < n_frames)
    fail(ErrorKind::Internal, "upsampled reconstruction shorter than input");
  result.reconstruction = ops::slice(recon, 0, 0, n_frames);
  return result;
}

std::vector<int32_t> VQModel::encode(const std::vector<double>& frames, int64_t n_frames) const {
  NoGradGuard no_grad;
  Tensor input = Tensor::from_data({n_frames, cfg_.frame_dim},
                                   std::vector<double>(frames.begin(), frames.end()));
  return forward(input, nullptr, cfg_.temperature).units;
}

std::vector<double> VQModel::decode(const std::vector<int32_t>& units, int64_t target_len) const {
  NoGradGuard no_grad;
  int64_t v = cfg_.codebook_size;
  for (int32_t u : units) {
    if (u == mask_token(v))
      fail(ErrorKind::Contract,
           "decode input contains the mask token; fill masked units before decoding");
    if (u < 0 || u >= v)
      fail(ErrorKind::Contract, "unit id " + std::to_string(u) + " outside codebook");
  }
  int64_t t = static_cast<int64_t>(units.size());
  if (t < 1) fail(ErrorKind::Contract, "cannot decode an empty unit sequence");
  Tensor quantized = ops::embedding(codebook_, units);
  int pad = (cfg_.resample_kernel - 1) / 2;
  Tensor g = nn::linear(quantized, from_code_);
  g = ops::conv1d_transpose(g, up_.w, up_.b, cfg_.downsample_stride, pad,
                            cfg_.downsample_stride - 1);
  for (const Block& b : dec_blocks_) g = run_block(b, g);
  Tensor recon = nn::linear(g, out_proj_);
  int64_t len = target_len > 0 ? target_len : recon.dim(0);
  if (len > recon.dim(0))
    fail(ErrorKind::Contract, "target length " + std::to_string(len) +
                                  " exceeds decodable length " + std::to_string(recon.dim(0)));
  Tensor sliced = ops::slice(recon, 0, 0, len);
  return std::vector<double>(sliced.data().begin(), sliced.data().end());
}

namespace {

double current_tau(const VQConfig& cfg, int64_t step) {
  if (!cfg.anneal_temperature) return cfg.temperature;
  double tau = cfg.temperature * std::exp(-cfg.anneal_rate * static_cast<double>(step));
  return std::max(tau, cfg.min_temperature);
}

}  // namespace

VQTrainStats train_vq(const Corpus& corpus, const std::vector<std::string>& split_names,
                      const VQConfig& cfg, const TrainConfig& train_cfg, uint64_t seed,
                      const std::string& checkpoint_path, const std::string& log_path,
                      const nlohmann::json& config_snapshot) {
  cfg.validate();
  train_cfg.validate();

  std::vector<const Utterance*> pool;
  for (const auto& name : split_names)
    for (const Utterance& u : corpus.split(name)) pool.push_back(&u);
  if (pool.empty()) fail(ErrorKind::Contract, "vq training needs a non-empty corpus");

  Rng rng(seed);
  Rng init_rng = rng.substream("init");
  Rng batch_rng = rng.substream("batch");
  Rng gumbel_rng = rng.substream("gumbel");

  VQModel model(cfg, init_rng);
  AdamOptimizer opt(train_cfg);
  auto& params = model.params();

  std::string log = "step,mse,diversity,perplexity,loss,lr\n";
  VQTrainStats stats;
  stats.steps = train_cfg.max_steps;

  auto save = [&]() {
    nlohmann::json ckpt_cfg = config_snapshot;
    ckpt_cfg["vq"] = cfg.to_json();
    save_checkpoint(checkpoint_path, "vq", params, ckpt_cfg);
  };

  for (int64_t step = 1; step <= train_cfg.max_steps; ++step) {
    double tau = current_tau(cfg, step);
    Tensor total;
    Tensor mse_sum;
    std::vector<Tensor> batch_assignments;
    for (int64_t b = 0; b < train_cfg.batch_size; ++b) {
      const Utterance& u = *pool[batch_rng.uniform_int(pool.size())];
      Tensor frames = Tensor::from_data({u.n_frames, u.frame_dim},
                                        std::vector<double>(u.frames.begin(), u.frames.end()));
      auto out = model.forward(frames, &gumbel_rng, tau);
      Tensor mse = ops::mse(out.reconstruction, frames);
      mse_sum = mse_sum.defined() ? ops::add(mse_sum, mse) : mse;
      batch_assignments.push_back(out.soft_assignment);
    }
    Tensor batch_mse = ops::mul(mse_sum, 1.0 / static_cast<double>(train_cfg.batch_size));
    Tensor assignments = ops::concat(batch_assignments, 0);
    Tensor diversity = diversity_loss(assignments);
    total = ops::add(batch_mse, ops::mul(diversity, cfg.diversity_weight));

    double loss_value = total.item();
    double perplexity = assignment_perplexity(assignments);
    if (!std::isfinite(loss_value)) {
      save();  // parameters are still the last good state
      fail(ErrorKind::Diverged, "vq training loss became non-finite at step " +
                                    std::to_string(step) + "; last good checkpoint kept");
    }
    if (step == 1) stats.initial_mse = batch_mse.item();
    if (step == 10) stats.perplexity_at_10 = perplexity;
    if (step == 500) stats.perplexity_at_500 = perplexity;
    stats.final_mse = batch_mse.item();

    char line[160];
    std::snprintf(line, sizeof line, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(step), batch_mse.item(), diversity.item(), perplexity,
                  loss_value, warmup_schedule(step, train_cfg));
    log += line;

    zero_grads(params);
    backward(total, params);
    opt.step(params, step);
  }

  save();
  atomic_write_text(log_path, log);
  return stats;
}

VQModel load_vq_model(const std::string& checkpoint_path) {
  if (!file_exists(checkpoint_path))
    fail(ErrorKind::Dependency,
         "missing VQ checkpoint '" + checkpoint_path + "'; run the train-vq stage first");
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.kind != "vq")
    fail(ErrorKind::Config, "'" + checkpoint_path + "' is a '" + ckpt.kind + "' checkpoint, expected vq");
  VQConfig cfg = VQConfig::from_json(ckpt.config.at("vq"));
  VQModel model(cfg, Rng(0));
  restore_params(ckpt, model.params());
  return model;
}

std::vector<AUSequence> encode_split(const VQModel& model, const std::vector<Utterance>& utts,
                                     bool use_ref_frames) {
  std::vector<AUSequence> sequences(utts.size());
  parallel_for(static_cast<int64_t>(utts.size()), [&](int64_t i) {
    const Utterance& u = utts[i];
    const auto& frames = use_ref_frames ? u.ref_frames : u.frames;
    if (frames.empty())
      fail(ErrorKind::Contract, "utterance '" + u.id + "' has no frames to encode");
    sequences[i] = AUSequence{u.id, model.encode(frames, u.n_frames)};
  });
  return sequences;
}

}  // namespace maulab
