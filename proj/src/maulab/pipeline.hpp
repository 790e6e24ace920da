#ifndef MAULAB_PIPELINE_HPP
#define MAULAB_PIPELINE_HPP

#include <string>
#include <vector>

#include "maulab/config.hpp"

namespace maulab {

// Stage orchestration over one output directory. Stages validate their
// input artifacts and fail with a dependency error naming the stage to run
// first; all writes are atomic.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg);

  static const std::vector<std::string>& stage_names();
  void run_stage(const std::string& name);

  void generate();
  void train_vq_stage();
  void encode_stage();
  void train_detector_stage();
  void finetune_corrector_stage();
  void detect_stage();
  void correct_stage();
  void evaluate_stage();
  void report_stage();

  const RunConfig& config() const { return cfg_; }

  // Artifact layout under out_dir.
  std::string corpus_dir() const;
  std::string vq_checkpoint() const;
  std::string detector_checkpoint() const;
  std::string corrector_checkpoint() const;
  std::string au_path(const std::string& split) const;
  std::string ref_au_path() const;
  std::string log_path(const std::string& name) const;
  std::string detection_path() const;
  std::string correction_au_path() const;
  std::string correction_frames_path() const;
  std::string evaluation_json_path() const;
  std::string evaluation_csv_path() const;
  std::string svg_dir() const;

 private:
  struct JoinedSplit {
    std::vector<LabeledSequence> items;
  };

  void require_artifact(const std::string& path, const std::string& producing_stage) const;
  void check_digest(const std::string& artifact_path, const std::string& expected) const;
  JoinedSplit load_labeled_split(const std::string& split, bool ref = false) const;
  uint64_t stage_seed(const std::string& stage) const;
  nlohmann::json snapshot() const;

  RunConfig cfg_;
};

}  // namespace maulab

#endif
