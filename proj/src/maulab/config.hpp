#ifndef MAULAB_CONFIG_HPP
#define MAULAB_CONFIG_HPP

#include <string>

#include <json.hpp>

#include "maulab/corpus.hpp"
#include "maulab/corruption.hpp"
#include "maulab/inference.hpp"
#include "maulab/optim.hpp"
#include "maulab/seq2seq.hpp"
#include "maulab/vq.hpp"

namespace maulab {

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json span_config_to_json(const SpanSamplerConfig& c);
SpanSamplerConfig span_config_from_json(const nlohmann::json& j);

nlohmann::json detection_config_to_json(const DetectionConfig& c);
DetectionConfig detection_config_from_json(const nlohmann::json& j);

// Resolved run configuration. The semantic parameter tree is the source of
// truth; out_dir stays outside it so identical runs in different directories
// produce identical artifacts and digests.
class RunConfig {
 public:
  static RunConfig from_preset(const std::string& preset);

  // Merge semantics: a config file is a JSON object with any subset of the
  // parameter sections plus optional "preset", "seed" and "out_dir".
  static RunConfig from_file(const std::string& path);

  void merge_file(const std::string& path);
  void set_override(const std::string& dotted_key, const std::string& value);

  void set_seed(uint64_t seed);
  void set_out_dir(const std::string& dir);

  uint64_t seed() const;
  const std::string& out_dir() const { return out_dir_; }
  std::string preset() const;

  CorpusParams corpus() const;
  VQConfig vq() const;
  TrainConfig vq_train() const;
  ModelConfig model() const;
  TrainConfig detector_train() const;
  TrainConfig corrector_train() const;
  SpanSamplerConfig corruption() const;
  DetectionConfig detection() const;
  int64_t detector_holdout() const;

  const nlohmann::json& params() const { return params_; }
  std::string digest() const;
  void validate() const;

 private:
  RunConfig() = default;
  nlohmann::json params_;
  std::string out_dir_ = "runs/out";
};

}  // namespace maulab

#endif
