#include "maulab/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "maulab/checkpoint.hpp"
#include "maulab/io.hpp"

namespace maulab {

void ModelConfig::validate() const {
  if (d_a < 1 || d_ff < 1) fail(ErrorKind::Config, "model dims must be positive");
  if (heads < 1 || d_a % heads != 0)
    fail(ErrorKind::Config, "d_a must be divisible by the head count");
  if (encoder_layers < 1 || decoder_layers < 1)
    fail(ErrorKind::Config, "layer counts must be >= 1");
  if (front_convs < 0) fail(ErrorKind::Config, "front_convs must be >= 0");
  if (enc_front_kernel % 2 == 0 || dec_front_kernel % 2 == 0)
    fail(ErrorKind::Config, "front kernels must be odd to preserve length");
  if (au_vocab < 3) fail(ErrorKind::Config, "au_vocab must cover units plus the mask token");
  if (phoneme_vocab < 1) fail(ErrorKind::Config, "phoneme_vocab must be >= 1");
}

nlohmann::json ModelConfig::to_json() const {
  return {
      {"d_a", d_a},
      {"d_ff", d_ff},
      {"heads", heads},
      {"encoder_layers", encoder_layers},
      {"decoder_layers", decoder_layers},
      {"enc_front_kernel", enc_front_kernel},
      {"dec_front_kernel", dec_front_kernel},
      {"front_convs", front_convs},
      {"au_vocab", au_vocab},
      {"phoneme_vocab", phoneme_vocab},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_a = j.at("d_a").get<int64_t>();
  c.d_ff = j.at("d_ff").get<int64_t>();
  c.heads = j.at("heads").get<int>();
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.decoder_layers = j.at("decoder_layers").get<int>();
  c.enc_front_kernel = j.at("enc_front_kernel").get<int>();
  c.dec_front_kernel = j.at("dec_front_kernel").get<int>();
  c.front_convs = j.at("front_convs").get<int>();
  c.au_vocab = j.at("au_vocab").get<int64_t>();
  c.phoneme_vocab = j.at("phoneme_vocab").get<int64_t>();
  return c;
}

std::vector<double> DetectorOutput::mask_probs() const {
  std::vector<double> probs(static_cast<size_t>(mask_logits.numel()));
  for (int64_t i = 0; i < mask_logits.numel(); ++i) {
    double z = mask_logits.data()[i];
    probs[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  return probs;
}

std::vector<int32_t> DetectorOutput::unit_argmax(bool exclude_mask_token) const {
  int64_t t = unit_logits.dim(0), v = unit_logits.dim(1);
  int64_t limit = exclude_mask_token ? v - 1 : v;
  std::vector<int32_t> out(static_cast<size_t>(t));
  for (int64_t i = 0; i < t; ++i) {
    const double* row = &unit_logits.data()[i * v];
    out[i] = static_cast<int32_t>(std::max_element(row, row + limit) - row);
  }
  return out;
}

Seq2SeqModel::Seq2SeqModel(const ModelConfig& cfg, Rng init_rng) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = init_rng;
  phoneme_embed_ = store_.xavier("enc.embed", {cfg_.phoneme_vocab, cfg_.d_a},
                                 cfg_.phoneme_vocab, cfg_.d_a, rng);
  au_embed_ = store_.xavier("dec.embed", {cfg_.au_vocab, cfg_.d_a}, cfg_.au_vocab, cfg_.d_a, rng);
  for (int i = 0; i < cfg_.front_convs; ++i) {
    enc_front_.push_back(nn::make_conv(store_, "enc.front" + std::to_string(i), cfg_.d_a,
                                       cfg_.d_a, cfg_.enc_front_kernel, rng));
    dec_front_.push_back(nn::make_conv(store_, "dec.front" + std::to_string(i), cfg_.d_a,
                                       cfg_.d_a, cfg_.dec_front_kernel, rng));
  }
  for (int i = 0; i < cfg_.encoder_layers; ++i) {
    EncoderLayer layer;
    std::string prefix = "enc.layer" + std::to_string(i);
    layer.ln1 = nn::make_layer_norm(store_, prefix + ".ln1", cfg_.d_a);
    layer.ln2 = nn::make_layer_norm(store_, prefix + ".ln2", cfg_.d_a);
    layer.attn = nn::make_attention(store_, prefix + ".attn", cfg_.d_a, rng);
    layer.ff = nn::make_feed_forward(store_, prefix + ".ff", cfg_.d_a, cfg_.d_ff, rng);
    enc_layers_.push_back(std::move(layer));
  }
  enc_final_ln_ = nn::make_layer_norm(store_, "enc.final_ln", cfg_.d_a);
  for (int i = 0; i < cfg_.decoder_layers; ++i) {
    DecoderLayer layer;
    std::string prefix = "dec.layer" + std::to_string(i);
    layer.ln1 = nn::make_layer_norm(store_, prefix + ".ln1", cfg_.d_a);
    layer.ln2 = nn::make_layer_norm(store_, prefix + ".ln2", cfg_.d_a);
    layer.ln3 = nn::make_layer_norm(store_, prefix + ".ln3", cfg_.d_a);
    layer.self_attn = nn::make_attention(store_, prefix + ".self", cfg_.d_a, rng);
    layer.cross_attn = nn::make_attention(store_, prefix + ".cross", cfg_.d_a, rng);
    layer.ff = nn::make_feed_forward(store_, prefix + ".ff", cfg_.d_a, cfg_.d_ff, rng);
    dec_layers_.push_back(std::move(layer));
  }
  dec_final_ln_ = nn::make_layer_norm(store_, "dec.final_ln", cfg_.d_a);
  head_units_ = nn::make_linear(store_, "dec.head_units", cfg_.d_a, cfg_.au_vocab, rng);
  head_mask_ = nn::make_linear(store_, "dec.head_mask", cfg_.d_a, 1, rng);
}

Tensor Seq2SeqModel::encode(const std::vector<int32_t>& phonemes, int64_t padded_len,
                            int64_t valid_len) const {
  std::vector<int32_t> ids(phonemes.begin(), phonemes.end());
  ids.resize(static_cast<size_t>(padded_len), 0);
  Tensor x = ops::embedding(phoneme_embed_, ids);
  Tensor row_mask = nn::valid_row_mask(padded_len, valid_len, cfg_.d_a);
  // Padded rows stay exactly zero through the convolutions so a wider pad
  // cannot leak into valid positions.
  x = ops::mul(x, row_mask);
  int pad = (cfg_.enc_front_kernel - 1) / 2;
  for (const auto& conv : enc_front_) {
    x = ops::gelu(ops::conv1d(x, conv.w, conv.b, 1, pad));
    x = ops::mul(x, row_mask);
  }
  x = ops::add(x, nn::sinusoidal_position_encoding(padded_len, cfg_.d_a));
  Tensor key_bias = nn::key_padding_bias(padded_len, padded_len, valid_len);
  for (const auto& layer : enc_layers_) {
    Tensor normed = nn::layer_norm(x, layer.ln1);
    x = ops::add(x, nn::attention(normed, normed, layer.attn, cfg_.heads, &key_bias).out);
    x = ops::add(x, nn::feed_forward(nn::layer_norm(x, layer.ln2), layer.ff));
  }
  return nn::layer_norm(x, enc_final_ln_);
}

DetectorOutput Seq2SeqModel::forward(const std::vector<int32_t>& corrupted_units,
                                     const std::vector<int32_t>& phonemes,
                                     int64_t padded_phoneme_len) const {
  if (corrupted_units.empty())
    fail(ErrorKind::Contract, "decoder input sequence is empty");
  if (phonemes.empty()) fail(ErrorKind::Contract, "phoneme sequence is empty");
  for (int32_t u : corrupted_units) {
    if (u < 0 || u >= cfg_.au_vocab)
      fail(ErrorKind::Contract, "unit id " + std::to_string(u) +
                                    " outside the AU vocabulary of " + std::to_string(cfg_.au_vocab));
  }
  int64_t valid_len = static_cast<int64_t>(phonemes.size());
  int64_t padded_len = padded_phoneme_len > 0 ? padded_phoneme_len : valid_len;
  if (padded_len < valid_len)
    fail(ErrorKind::InvalidArgument, "padded length shorter than the phoneme sequence");

  Tensor enc_out = encode(phonemes, padded_len, valid_len);

  int64_t t_len = static_cast<int64_t>(corrupted_units.size());
  Tensor y = ops::embedding(au_embed_, corrupted_units);
  int pad = (cfg_.dec_front_kernel - 1) / 2;
  for (const auto& conv : dec_front_)
    y = ops::gelu(ops::conv1d(y, conv.w, conv.b, 1, pad));
  y = ops::add(y, nn::sinusoidal_position_encoding(t_len, cfg_.d_a));

  Tensor cross_bias = nn::key_padding_bias(t_len, padded_len, valid_len);
  DetectorOutput out;
  for (size_t i = 0; i < dec_layers_.size(); ++i) {
    const DecoderLayer& layer = dec_layers_[i];
    // Full bidirectional self-attention: the whole corrupted sequence is
    // given, so no causal shift.
    Tensor normed = nn::layer_norm(y, layer.ln1);
    y = ops::add(y, nn::attention(normed, normed, layer.self_attn, cfg_.heads).out);
    Tensor q = nn::layer_norm(y, layer.ln2);
    nn::AttentionResult cross =
        nn::attention(q, enc_out, layer.cross_attn, cfg_.heads, &cross_bias);
    y = ops::add(y, cross.out);
    y = ops::add(y, nn::feed_forward(nn::layer_norm(y, layer.ln3), layer.ff));
    if (i + 1 == dec_layers_.size()) {
      for (Tensor& w : cross.weights)
        out.cross_attention.push_back(ops::slice(w, 1, 0, valid_len));
    }
  }
  y = nn::layer_norm(y, dec_final_ln_);
  out.unit_logits = nn::linear(y, head_units_);
  out.mask_logits = ops::reshape(nn::linear(y, head_mask_), {t_len});
  return out;
}

LossBreakdown detection_loss(const DetectorOutput& output,
                             const std::vector<int32_t>& target_units,
                             const std::vector<uint8_t>& mask, bool include_bce) {
  int64_t t_len = output.unit_logits.dim(0);
  if (static_cast<int64_t>(target_units.size()) != t_len ||
      static_cast<int64_t>(mask.size()) != t_len)
    fail(ErrorKind::Contract, "loss targets must match the sequence length");
  LossBreakdown loss;
  loss.ce = ops::cross_entropy(output.unit_logits, target_units);
  if (include_bce) {
    std::vector<double> mask_targets(mask.begin(), mask.end());
    loss.bce = ops::bce_with_logits(output.mask_logits, mask_targets);
    loss.total = ops::add(loss.ce, loss.bce);
  } else {
    loss.total = loss.ce;
  }
  return loss;
}

namespace {

struct TrainSetup {
  std::vector<AUSequence> pool;
};

TrainSetup make_pool(const std::vector<LabeledSequence>& train_set) {
  TrainSetup s;
  s.pool.reserve(train_set.size());
  for (const auto& item : train_set) s.pool.push_back(item.au);
  return s;
}

DetectorTrainStats run_training(Seq2SeqModel& model, const std::vector<LabeledSequence>& train_set,
                                const TrainConfig& train_cfg, const SpanSamplerConfig& span_cfg,
                                uint64_t seed, bool include_bce, const std::string& kind,
                                const std::string& checkpoint_path, const std::string& log_path,
                                const nlohmann::json& config_snapshot) {
  if (train_set.empty()) fail(ErrorKind::Contract, "training set is empty");
  train_cfg.validate();
  TrainSetup setup = make_pool(train_set);
  int64_t unit_vocab = model.config().unit_vocab();

  Rng rng(seed);
  Rng batch_rng = rng.substream("batch");
  Rng corrupt_rng = rng.substream("corrupt");

  AdamOptimizer opt(train_cfg);
  auto& params = model.params();

  auto save = [&]() {
    nlohmann::json ckpt_cfg = config_snapshot;
    ckpt_cfg["model"] = model.config().to_json();
    save_checkpoint(checkpoint_path, kind, params, ckpt_cfg);
  };

  std::string log = include_bce ? "step,loss,ce,bce,lr\n" : "step,loss,ce,lr\n";
  DetectorTrainStats stats;
  stats.steps = train_cfg.max_steps;

  for (int64_t step = 1; step <= train_cfg.max_steps; ++step) {
    Tensor loss_sum, ce_sum, bce_sum;
    for (int64_t b = 0; b < train_cfg.batch_size; ++b) {
      const LabeledSequence& item = train_set[batch_rng.uniform_int(train_set.size())];
      CorruptionRecord record = corrupt(corrupt_rng, item.au, setup.pool, span_cfg, unit_vocab);
      verify_record(record);
      DetectorOutput out = model.forward(record.corrupted, item.phonemes);
      LossBreakdown lb = detection_loss(out, item.au.units, record.mask, include_bce);
      loss_sum = loss_sum.defined() ? ops::add(loss_sum, lb.total) : lb.total;
      ce_sum = ce_sum.defined() ? ops::add(ce_sum, lb.ce) : lb.ce;
      if (include_bce) bce_sum = bce_sum.defined() ? ops::add(bce_sum, lb.bce) : lb.bce;
    }
    double inv_b = 1.0 / static_cast<double>(train_cfg.batch_size);
    Tensor loss = ops::mul(loss_sum, inv_b);
    double loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      save();
      fail(ErrorKind::Diverged, kind + " training loss became non-finite at step " +
                                    std::to_string(step) + "; last good checkpoint kept");
    }
    if (step == 10) stats.loss_at_10 = loss_value;
    if (step == 2000) stats.loss_at_2000 = loss_value;
    stats.final_loss = loss_value;

    char line[160];
    if (include_bce) {
      std::snprintf(line, sizeof line, "%lld,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(step), loss_value, ce_sum.item() * inv_b,
                    bce_sum.item() * inv_b, warmup_schedule(step, train_cfg));
    } else {
      std::snprintf(line, sizeof line, "%lld,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(step), loss_value, ce_sum.item() * inv_b,
                    warmup_schedule(step, train_cfg));
    }
    log += line;

    zero_grads(params);
    backward(loss, params);
    opt.step(params, step);
  }

  save();
  atomic_write_text(log_path, log);
  return stats;
}

}  // namespace

DetectorTrainStats train_detector(const std::vector<LabeledSequence>& train_set,
                                  const ModelConfig& cfg, const TrainConfig& train_cfg,
                                  const SpanSamplerConfig& span_cfg, uint64_t seed,
                                  const std::string& checkpoint_path,
                                  const std::string& log_path,
                                  const nlohmann::json& config_snapshot) {
  SpanSamplerConfig detector_spans = span_cfg;
  detector_spans.mode = CorruptionMode::Distractor;
  Rng init_rng = Rng(seed).substream("init");
  Seq2SeqModel model(cfg, init_rng);
  return run_training(model, train_set, train_cfg, detector_spans, seed, true, "detector",
                      checkpoint_path, log_path, config_snapshot);
}

DetectorTrainStats finetune_corrector(const std::string& detector_checkpoint,
                                      const std::vector<LabeledSequence>& train_set,
                                      const TrainConfig& train_cfg,
                                      const SpanSamplerConfig& span_cfg, uint64_t seed,
                                      const std::string& checkpoint_path,
                                      const std::string& log_path,
                                      const nlohmann::json& config_snapshot) {
  if (!file_exists(detector_checkpoint))
    fail(ErrorKind::Dependency, "missing detector checkpoint '" + detector_checkpoint +
                                    "'; run the train-detector stage first");
  Checkpoint ckpt = load_checkpoint(detector_checkpoint);
  if (ckpt.kind != "detector")
    fail(ErrorKind::Config, "'" + detector_checkpoint + "' is a '" + ckpt.kind +
                                "' checkpoint, expected detector");
  ModelConfig cfg = ModelConfig::from_json(ckpt.config.at("model"));
  Seq2SeqModel model(cfg, Rng(0));
  restore_params(ckpt, model.params());  // fine-tune starts from detector weights

  SpanSamplerConfig mask_spans = span_cfg;
  mask_spans.mode = CorruptionMode::MaskToken;
  return run_training(model, train_set, train_cfg, mask_spans, seed, false, "corrector",
                      checkpoint_path, log_path, config_snapshot);
}

Seq2SeqModel load_seq2seq_model(const std::string& checkpoint_path,
                                const std::string& expected_kind) {
  if (!file_exists(checkpoint_path))
    fail(ErrorKind::Dependency, "missing checkpoint '" + checkpoint_path + "'");
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.kind != expected_kind)
    fail(ErrorKind::Config, "'" + checkpoint_path + "' is a '" + ckpt.kind +
                                "' checkpoint, expected " + expected_kind);
  ModelConfig cfg = ModelConfig::from_json(ckpt.config.at("model"));
  Seq2SeqModel model(cfg, Rng(0));
  restore_params(ckpt, model.params());
  return model;
}

std::vector<std::pair<double, int>> collect_mask_scores(
    const Seq2SeqModel& model, const std::vector<LabeledSequence>& holdout,
    const std::vector<AUSequence>& distractor_pool, const SpanSamplerConfig& span_cfg,
    uint64_t seed) {
  NoGradGuard no_grad;
  SpanSamplerConfig cfg = span_cfg;
  cfg.mode = CorruptionMode::Distractor;
  Rng rng(seed);
  std::vector<std::pair<double, int>> pairs;
  for (const LabeledSequence& item : holdout) {
    CorruptionRecord record = corrupt(rng, item.au, distractor_pool, cfg, model.config().unit_vocab());
    verify_record(record);
    DetectorOutput out = model.forward(record.corrupted, item.phonemes);
    std::vector<double> probs = out.mask_probs();
    for (size_t t = 0; t < probs.size(); ++t)
      pairs.emplace_back(probs[t], record.mask[t]);
  }
  return pairs;
}

}  // namespace maulab
