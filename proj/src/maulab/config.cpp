#include "maulab/config.hpp"

#include "maulab/io.hpp"

namespace maulab {

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {
      {"base_lr", c.base_lr},
      {"warmup_steps", c.warmup_steps},
      {"model_dim_for_schedule", c.model_dim_for_schedule},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"max_steps", c.max_steps},
      {"batch_size", c.batch_size},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.base_lr = j.at("base_lr").get<double>();
  c.warmup_steps = j.at("warmup_steps").get<int64_t>();
  c.model_dim_for_schedule = j.at("model_dim_for_schedule").get<int64_t>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.max_steps = j.at("max_steps").get<int64_t>();
  c.batch_size = j.at("batch_size").get<int64_t>();
  return c;
}

nlohmann::json span_config_to_json(const SpanSamplerConfig& c) {
  return {
      {"span_count_divisor", c.span_count_divisor},
      {"k_max", c.k_max},
  };
}

SpanSamplerConfig span_config_from_json(const nlohmann::json& j) {
  SpanSamplerConfig c;
  c.span_count_divisor = j.at("span_count_divisor").get<int64_t>();
  c.k_max = j.at("k_max").get<int64_t>();
  return c;
}

nlohmann::json detection_config_to_json(const DetectionConfig& c) {
  return {
      {"phoneme_threshold", c.phoneme_threshold},
      {"au_mask_threshold", c.au_mask_threshold},
  };
}

DetectionConfig detection_config_from_json(const nlohmann::json& j) {
  DetectionConfig c;
  c.phoneme_threshold = j.at("phoneme_threshold").get<double>();
  c.au_mask_threshold = j.at("au_mask_threshold").get<double>();
  return c;
}

namespace {

nlohmann::json desk_params() {
  nlohmann::json p;
  p["preset"] = "desk";
  p["seed"] = 1234;

  CorpusParams corpus;  // desk defaults live on the struct
  p["corpus"] = corpus.to_json();

  VQConfig vq;
  p["vq"] = vq.to_json();

  TrainConfig vq_train;
  vq_train.base_lr = 0.2;
  vq_train.warmup_steps = 100;
  vq_train.model_dim_for_schedule = 32;
  vq_train.max_steps = 800;
  vq_train.batch_size = 8;
  p["vq_train"] = train_config_to_json(vq_train);

  ModelConfig model;
  p["model"] = model.to_json();

  TrainConfig detector_train;
  detector_train.base_lr = 0.35;
  detector_train.warmup_steps = 200;
  detector_train.model_dim_for_schedule = 64;
  detector_train.max_steps = 2200;
  detector_train.batch_size = 8;
  p["detector_train"] = train_config_to_json(detector_train);

  TrainConfig corrector_train;
  corrector_train.base_lr = 0.2;
  corrector_train.warmup_steps = 100;
  corrector_train.model_dim_for_schedule = 64;
  corrector_train.max_steps = 1400;
  corrector_train.batch_size = 8;
  p["corrector_train"] = train_config_to_json(corrector_train);

  SpanSamplerConfig corruption;
  p["corruption"] = span_config_to_json(corruption);

  DetectionConfig detection;
  p["detection"] = detection_config_to_json(detection);

  p["detector_holdout"] = 32;
  return p;
}

// Table-scale dimensions; constructible, far too slow to train in tests.
nlohmann::json paper_params() {
  nlohmann::json p = desk_params();
  p["preset"] = "paper";
  p["corpus"]["frame_dim"] = 80;

  p["vq"]["codebook_size"] = 512;
  p["vq"]["code_dim"] = 64;
  p["vq"]["width"] = 384;
  p["vq"]["ff_dim"] = 1536;
  p["vq"]["heads"] = 2;
  p["vq"]["encoder_blocks"] = 3;
  p["vq"]["decoder_blocks"] = 3;
  p["vq"]["enc_dw_kernel"] = 7;
  p["vq"]["dec_dw_kernel"] = 31;
  p["vq"]["frame_dim"] = 80;

  p["vq_train"]["base_lr"] = 1.0;
  p["vq_train"]["warmup_steps"] = 4000;
  p["vq_train"]["model_dim_for_schedule"] = 384;
  p["vq_train"]["max_steps"] = 100000;

  p["model"]["d_a"] = 512;
  p["model"]["d_ff"] = 1024;
  p["model"]["heads"] = 4;
  p["model"]["encoder_layers"] = 6;
  p["model"]["decoder_layers"] = 12;
  p["model"]["au_vocab"] = 513;

  p["detector_train"]["base_lr"] = 1.0;
  p["detector_train"]["warmup_steps"] = 4000;
  p["detector_train"]["model_dim_for_schedule"] = 512;
  p["detector_train"]["max_steps"] = 100000;

  // Fine-tune learning rate 1e-4.
  p["corrector_train"]["base_lr"] = 1e-4;
  p["corrector_train"]["warmup_steps"] = 4000;
  p["corrector_train"]["model_dim_for_schedule"] = 512;
  p["corrector_train"]["max_steps"] = 100000;
  return p;
}

nlohmann::json parse_override_value(const std::string& value) {
  try {
    return nlohmann::json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    return nlohmann::json(value);  // plain string
  }
}

}  // namespace

RunConfig RunConfig::from_preset(const std::string& preset) {
  RunConfig cfg;
  if (preset == "desk") {
    cfg.params_ = desk_params();
  } else if (preset == "paper") {
    cfg.params_ = paper_params();
  } else {
    fail(ErrorKind::Config, "unknown preset '" + preset + "' (expected desk or paper)");
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  nlohmann::json file = read_json(path);
  std::string preset = file.value("preset", "desk");
  RunConfig cfg = from_preset(preset);
  cfg.merge_file(path);
  return cfg;
}

void RunConfig::merge_file(const std::string& path) {
  nlohmann::json file = read_json(path);
  if (!file.is_object()) fail(ErrorKind::Config, "config file must hold a JSON object");
  if (file.contains("out_dir")) {
    out_dir_ = file.at("out_dir").get<std::string>();
    file.erase("out_dir");
  }
  params_.merge_patch(file);
}

void RunConfig::set_override(const std::string& dotted_key, const std::string& value) {
  if (dotted_key == "out_dir") {
    out_dir_ = value;
    return;
  }
  nlohmann::json* node = &params_;
  size_t pos = 0;
  while (true) {
    size_t dot = dotted_key.find('.', pos);
    std::string part = dotted_key.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (part.empty()) fail(ErrorKind::Config, "invalid override key '" + dotted_key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = parse_override_value(value);
      return;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

void RunConfig::set_seed(uint64_t seed) { params_["seed"] = seed; }
void RunConfig::set_out_dir(const std::string& dir) { out_dir_ = dir; }

uint64_t RunConfig::seed() const { return params_.at("seed").get<uint64_t>(); }
std::string RunConfig::preset() const { return params_.value("preset", "desk"); }

CorpusParams RunConfig::corpus() const { return CorpusParams::from_json(params_.at("corpus")); }
VQConfig RunConfig::vq() const { return VQConfig::from_json(params_.at("vq")); }
TrainConfig RunConfig::vq_train() const { return train_config_from_json(params_.at("vq_train")); }
ModelConfig RunConfig::model() const { return ModelConfig::from_json(params_.at("model")); }
TrainConfig RunConfig::detector_train() const {
  return train_config_from_json(params_.at("detector_train"));
}
TrainConfig RunConfig::corrector_train() const {
  return train_config_from_json(params_.at("corrector_train"));
}
SpanSamplerConfig RunConfig::corruption() const {
  return span_config_from_json(params_.at("corruption"));
}
DetectionConfig RunConfig::detection() const {
  return detection_config_from_json(params_.at("detection"));
}
int64_t RunConfig::detector_holdout() const {
  return params_.at("detector_holdout").get<int64_t>();
}

std::string RunConfig::digest() const { return fnv1a64_hex(params_.dump()); }

void RunConfig::validate() const {
  CorpusParams corpus_params = corpus();
  corpus_params.validate();
  VQConfig vq_cfg = vq();
  vq_cfg.validate();
  vq_train().validate();
  ModelConfig model_cfg = model();
  model_cfg.validate();
  detector_train().validate();
  corrector_train().validate();
  detection().validate();
  if (corruption().k_max < 1) fail(ErrorKind::Config, "corruption k_max must be >= 1");

  if (vq_cfg.frame_dim != corpus_params.frame_dim)
    fail(ErrorKind::Config, "vq.frame_dim must equal corpus.frame_dim");
  if (model_cfg.au_vocab != vq_cfg.codebook_size + 1)
    fail(ErrorKind::Config, "model.au_vocab must equal vq.codebook_size + 1 (mask token)");
  if (model_cfg.phoneme_vocab != corpus_params.phoneme_vocab)
    fail(ErrorKind::Config, "model.phoneme_vocab must equal corpus.phoneme_vocab");
  int64_t holdout = detector_holdout();
  if (holdout < 1 || holdout >= corpus_params.l1_train_count)
    fail(ErrorKind::Config, "detector_holdout must leave training utterances");
}

}  // namespace maulab
