#include "maulab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>

#include "maulab/checkpoint.hpp"
#include "maulab/inference.hpp"
#include "maulab/io.hpp"
#include "maulab/metrics.hpp"
#include "maulab/parallel.hpp"
#include "maulab/svg.hpp"

namespace maulab {

namespace {

const std::vector<std::string> kStages = {
    "generate",        "train-vq", "encode",  "train-detector", "finetune-corrector",
    "detect",          "correct",  "evaluate", "report",
};

std::vector<std::pair<double, double>> csv_series(const std::string& csv, size_t column) {
  std::vector<std::pair<double, double>> points;
  size_t pos = csv.find('\n');  // skip header
  if (pos == std::string::npos) return points;
  ++pos;
  while (pos < csv.size()) {
    size_t end = csv.find('\n', pos);
    if (end == std::string::npos) end = csv.size();
    std::string line = csv.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    std::vector<double> fields;
    size_t fpos = 0;
    while (fpos <= line.size()) {
      size_t comma = line.find(',', fpos);
      if (comma == std::string::npos) comma = line.size();
      fields.push_back(std::atof(line.substr(fpos, comma - fpos).c_str()));
      fpos = comma + 1;
    }
    if (column < fields.size()) points.emplace_back(fields[0], fields[column]);
  }
  return points;
}

}  // namespace

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();  // a stage never starts from an incomplete parameter set
}

const std::vector<std::string>& Pipeline::stage_names() { return kStages; }

std::string Pipeline::corpus_dir() const { return cfg_.out_dir() + "/corpus"; }
std::string Pipeline::vq_checkpoint() const { return cfg_.out_dir() + "/checkpoints/vq.ckpt"; }
std::string Pipeline::detector_checkpoint() const {
  return cfg_.out_dir() + "/checkpoints/detector.ckpt";
}
std::string Pipeline::corrector_checkpoint() const {
  return cfg_.out_dir() + "/checkpoints/corrector.ckpt";
}
std::string Pipeline::au_path(const std::string& split) const {
  return cfg_.out_dir() + "/au/" + split + ".au.jsonl";
}
std::string Pipeline::ref_au_path() const {
  return cfg_.out_dir() + "/au/" + std::string(kSplitL2Test) + ".ref.au.jsonl";
}
std::string Pipeline::log_path(const std::string& name) const {
  return cfg_.out_dir() + "/logs/" + name + ".csv";
}
std::string Pipeline::detection_path() const { return cfg_.out_dir() + "/reports/detection.jsonl"; }
std::string Pipeline::correction_au_path() const {
  return cfg_.out_dir() + "/reports/correction.au.jsonl";
}
std::string Pipeline::correction_frames_path() const {
  return cfg_.out_dir() + "/reports/correction.frames.bin";
}
std::string Pipeline::evaluation_json_path() const {
  return cfg_.out_dir() + "/reports/evaluation.json";
}
std::string Pipeline::evaluation_csv_path() const {
  return cfg_.out_dir() + "/reports/evaluation.csv";
}
std::string Pipeline::svg_dir() const { return cfg_.out_dir() + "/reports/svg"; }

void Pipeline::require_artifact(const std::string& path, const std::string& producing_stage) const {
  if (!file_exists(path))
    fail(ErrorKind::Dependency,
         "missing artifact '" + path + "'; run the '" + producing_stage + "' stage first");
}

void Pipeline::check_digest(const std::string& artifact_path, const std::string& expected) const {
  nlohmann::json meta = read_meta(artifact_path);
  std::string found = meta.value("config_digest", "");
  if (found != expected)
    fail(ErrorKind::Config, "artifact '" + artifact_path + "' was produced under config digest " +
                                found + ", expected " + expected +
                                "; regenerate the pipeline with one configuration");
}

uint64_t Pipeline::stage_seed(const std::string& stage) const {
  return mix_seed(cfg_.seed(), hash64(stage));
}

nlohmann::json Pipeline::snapshot() const {
  return {{"config_digest", cfg_.digest()}, {"seed", cfg_.seed()}, {"preset", cfg_.preset()}};
}

void Pipeline::run_stage(const std::string& name) {
  if (name == "generate") generate();
  else if (name == "train-vq") train_vq_stage();
  else if (name == "encode") encode_stage();
  else if (name == "train-detector") train_detector_stage();
  else if (name == "finetune-corrector") finetune_corrector_stage();
  else if (name == "detect") detect_stage();
  else if (name == "correct") correct_stage();
  else if (name == "evaluate") evaluate_stage();
  else if (name == "report") report_stage();
  else
    fail(ErrorKind::InvalidArgument,
         "unknown stage '" + name + "'; stages run in the order: generate, train-vq, encode, "
         "train-detector, finetune-corrector, detect, correct, evaluate, report");
}

void Pipeline::generate() {
  Corpus corpus = generate_corpus(stage_seed("corpus"), cfg_.corpus());
  save_corpus(corpus, corpus_dir(), cfg_.digest());
}

void Pipeline::train_vq_stage() {
  require_artifact(corpus_dir() + "/manifest.json", "generate");
  Corpus corpus = load_corpus(corpus_dir());
  // Unsupervised training uses the native split plus the unlabeled
  // second-language split; the annotated test split stays out.
  train_vq(corpus, {kSplitL1Train, kSplitL2Train}, cfg_.vq(), cfg_.vq_train(),
           stage_seed("train-vq"), vq_checkpoint(), log_path("vq_train"), snapshot());
  write_meta(log_path("vq_train"), "train-vq", cfg_.digest(), cfg_.seed());
}

void Pipeline::encode_stage() {
  require_artifact(corpus_dir() + "/manifest.json", "generate");
  require_artifact(vq_checkpoint(), "train-vq");
  Corpus corpus = load_corpus(corpus_dir());
  VQModel model = load_vq_model(vq_checkpoint());
  if (model.config().frame_dim != corpus.params.frame_dim)
    fail(ErrorKind::Config, "VQ checkpoint frame_dim does not match the corpus");

  auto write_split = [&](const std::string& split, bool ref) {
    const auto& utts = corpus.split(split);
    auto sequences = encode_split(model, utts, ref);
    std::vector<nlohmann::json> records;
    records.reserve(sequences.size());
    for (const AUSequence& s : sequences)
      records.push_back({{"id", s.id}, {"units", s.units}});
    std::string path = ref ? ref_au_path() : au_path(split);
    write_jsonl(path, records);
    write_meta(path, "encode", cfg_.digest(), cfg_.seed());
  };
  write_split(kSplitL1Train, false);
  write_split(kSplitL2Train, false);
  write_split(kSplitL2Test, false);
  write_split(kSplitL2Test, true);
}

Pipeline::JoinedSplit Pipeline::load_labeled_split(const std::string& split, bool ref) const {
  std::string path = ref ? ref_au_path() : au_path(split);
  require_artifact(path, "encode");
  check_digest(path, cfg_.digest());
  auto records = read_jsonl(path);
  Corpus corpus = load_corpus(corpus_dir());
  const auto& utts = corpus.split(split);
  if (records.size() != utts.size())
    fail(ErrorKind::Contract, "AU file '" + path + "' does not match the corpus split");
  JoinedSplit joined;
  for (size_t i = 0; i < records.size(); ++i) {
    LabeledSequence item;
    item.au.id = records[i].at("id").get<std::string>();
    item.au.units = records[i].at("units").get<std::vector<int32_t>>();
    if (item.au.id != utts[i].id)
      fail(ErrorKind::Contract, "AU order mismatch at '" + item.au.id + "'");
    item.phonemes = utts[i].phonemes;
    joined.items.push_back(std::move(item));
  }
  return joined;
}

void Pipeline::train_detector_stage() {
  require_artifact(corpus_dir() + "/manifest.json", "generate");
  JoinedSplit l1 = load_labeled_split(kSplitL1Train);
  int64_t holdout = cfg_.detector_holdout();
  if (holdout >= static_cast<int64_t>(l1.items.size()))
    fail(ErrorKind::Config, "detector_holdout leaves no training data");
  std::vector<LabeledSequence> train_set(l1.items.begin(), l1.items.end() - holdout);
  train_detector(train_set, cfg_.model(), cfg_.detector_train(), cfg_.corruption(),
                 stage_seed("train-detector"), detector_checkpoint(),
                 log_path("detector_train"), snapshot());
  write_meta(log_path("detector_train"), "train-detector", cfg_.digest(), cfg_.seed());
}

void Pipeline::finetune_corrector_stage() {
  require_artifact(detector_checkpoint(), "train-detector");
  JoinedSplit l1 = load_labeled_split(kSplitL1Train);
  int64_t holdout = cfg_.detector_holdout();
  std::vector<LabeledSequence> train_set(l1.items.begin(), l1.items.end() - holdout);
  finetune_corrector(detector_checkpoint(), train_set, cfg_.corrector_train(),
                     cfg_.corruption(), stage_seed("finetune-corrector"),
                     corrector_checkpoint(), log_path("corrector_train"), snapshot());
  write_meta(log_path("corrector_train"), "finetune-corrector", cfg_.digest(), cfg_.seed());
}

void Pipeline::detect_stage() {
  require_artifact(detector_checkpoint(), "train-detector");
  JoinedSplit test = load_labeled_split(kSplitL2Test);
  Seq2SeqModel detector = load_seq2seq_model(detector_checkpoint(), "detector");
  DetectionConfig det_cfg = cfg_.detection();

  std::vector<nlohmann::json> records(test.items.size());
  parallel_for(static_cast<int64_t>(test.items.size()), [&](int64_t i) {
    const LabeledSequence& item = test.items[i];
    DetectionResult r = detect(item.au, item.phonemes, detector, det_cfg);
    records[i] = {{"id", item.au.id},
                  {"E_hat", r.alignment.phoneme_scores},
                  {"decisions", r.alignment.decisions},
                  {"H", det_cfg.phoneme_threshold},
                  {"m_hat", r.mask_probs}};
  });
  write_jsonl(detection_path(), records);
  write_meta(detection_path(), "detect", cfg_.digest(), cfg_.seed());
}

void Pipeline::correct_stage() {
  require_artifact(detection_path(), "detect");
  require_artifact(corrector_checkpoint(), "finetune-corrector");
  require_artifact(vq_checkpoint(), "train-vq");
  check_digest(detection_path(), cfg_.digest());
  JoinedSplit test = load_labeled_split(kSplitL2Test);
  Corpus corpus = load_corpus(corpus_dir());
  const auto& utts = corpus.split(kSplitL2Test);
  Seq2SeqModel corrector = load_seq2seq_model(corrector_checkpoint(), "corrector");
  VQModel vq = load_vq_model(vq_checkpoint());
  DetectionConfig det_cfg = cfg_.detection();

  auto detections = read_jsonl(detection_path());
  if (detections.size() != test.items.size())
    fail(ErrorKind::Contract, "detection output does not match the test split");

  std::vector<nlohmann::json> au_records(test.items.size());
  std::vector<FrameRecord> frame_records(test.items.size());
  parallel_for(static_cast<int64_t>(test.items.size()), [&](int64_t i) {
    const LabeledSequence& item = test.items[i];
    if (detections[i].at("id").get<std::string>() != item.au.id)
      fail(ErrorKind::Contract, "detection order mismatch at '" + item.au.id + "'");
    std::vector<double> m_hat = detections[i].at("m_hat").get<std::vector<double>>();
    CorrectionResult r = correct(item.au, item.phonemes, m_hat, corrector, vq, det_cfg,
                                 utts[i].n_frames);
    au_records[i] = {{"id", item.au.id},
                     {"units", r.corrected_units},
                     {"fill_mask", r.fill_mask}};
    FrameRecord fr;
    fr.id = item.au.id;
    fr.n_frames = static_cast<uint32_t>(r.n_frames);
    fr.dim = static_cast<uint32_t>(r.frame_dim);
    fr.data.assign(r.corrected_frames.begin(), r.corrected_frames.end());
    frame_records[i] = std::move(fr);
  });
  write_jsonl(correction_au_path(), au_records);
  write_meta(correction_au_path(), "correct", cfg_.digest(), cfg_.seed());
  write_frames_file(correction_frames_path(), frame_records);
  write_meta(correction_frames_path(), "correct", cfg_.digest(), cfg_.seed());
}

void Pipeline::evaluate_stage() {
  require_artifact(corpus_dir() + "/manifest.json", "generate");
  require_artifact(detection_path(), "detect");
  require_artifact(correction_au_path(), "correct");
  require_artifact(correction_frames_path(), "correct");
  require_artifact(detector_checkpoint(), "train-detector");
  require_artifact(vq_checkpoint(), "train-vq");

  const std::string digest = cfg_.digest();
  nlohmann::json manifest = read_json(corpus_dir() + "/manifest.json");
  if (manifest.value("config_digest", "") != digest)
    fail(ErrorKind::Config, "corpus was generated under a different configuration");
  check_digest(detection_path(), digest);
  check_digest(correction_au_path(), digest);
  check_digest(correction_frames_path(), digest);
  for (const std::string& split : {kSplitL1Train, kSplitL2Test}) check_digest(au_path(split), digest);
  check_digest(ref_au_path(), digest);

  Corpus corpus = load_corpus(corpus_dir());
  const auto& test_utts = corpus.split(kSplitL2Test);
  JoinedSplit test = load_labeled_split(kSplitL2Test);
  JoinedSplit ref = load_labeled_split(kSplitL2Test, /*ref=*/true);
  auto detections = read_jsonl(detection_path());
  auto corrections = read_jsonl(correction_au_path());
  auto corrected_frames = read_frames_file(correction_frames_path());
  if (detections.size() != test_utts.size() || corrections.size() != test_utts.size() ||
      corrected_frames.size() != test_utts.size())
    fail(ErrorKind::Contract, "evaluation inputs do not cover the test split");

  // Detection metrics against the synthetic ground truth.
  std::vector<std::vector<uint8_t>> decisions, labels;
  int64_t positive = 0, decided = 0, phonemes_total = 0;
  for (size_t i = 0; i < test_utts.size(); ++i) {
    decisions.push_back(detections[i].at("decisions").get<std::vector<uint8_t>>());
    labels.push_back(test_utts[i].error_labels);
    for (uint8_t l : labels.back()) positive += l;
    for (uint8_t d : decisions.back()) decided += d;
    phonemes_total += static_cast<int64_t>(labels.back().size());
  }
  PRF1 detection_scores = prf1(decisions, labels);
  double positive_rate = phonemes_total ? static_cast<double>(positive) / phonemes_total : 0.0;
  double decision_rate = phonemes_total ? static_cast<double>(decided) / phonemes_total : 0.0;
  double random_f1 = (positive_rate + decision_rate) > 0.0
                         ? 2.0 * positive_rate * decision_rate / (positive_rate + decision_rate)
                         : 0.0;

  // Mask AUC on held-out corrupted L1.
  JoinedSplit l1 = load_labeled_split(kSplitL1Train);
  int64_t holdout = cfg_.detector_holdout();
  std::vector<LabeledSequence> train_part(l1.items.begin(), l1.items.end() - holdout);
  std::vector<LabeledSequence> holdout_part(l1.items.end() - holdout, l1.items.end());
  std::vector<AUSequence> pool;
  for (const auto& item : train_part) pool.push_back(item.au);
  Seq2SeqModel detector = load_seq2seq_model(detector_checkpoint(), "detector");
  auto score_pairs = collect_mask_scores(detector, holdout_part, pool, cfg_.corruption(),
                                         stage_seed("auc-eval"));
  std::vector<double> scores;
  std::vector<int> score_labels;
  for (auto [s, l] : score_pairs) {
    scores.push_back(s);
    score_labels.push_back(l);
  }
  auto auc = mask_auc(scores, score_labels);

  // Clean L1 behaviour: mean phoneme score should sit below H.
  DetectionConfig det_cfg = cfg_.detection();
  int64_t l1_below = 0;
  for (const auto& item : holdout_part) {
    DetectionResult r = detect(item.au, item.phonemes, detector, det_cfg);
    double mean_score = 0.0;
    for (double s : r.alignment.phoneme_scores) mean_score += s;
    mean_score /= static_cast<double>(r.alignment.phoneme_scores.size());
    if (mean_score < det_cfg.phoneme_threshold) ++l1_below;
  }
  double l1_clean_fraction =
      holdout_part.empty() ? 0.0 : static_cast<double>(l1_below) / holdout_part.size();

  // Correction metrics. Reference units come from re-encoding the clean
  // rendering; frame errors compare against the clean rendering directly.
  VQModel vq = load_vq_model(vq_checkpoint());
  RecoveryCounts recovery;
  int64_t copy_ok = 0, copy_total = 0;
  double mse_corrected_sum = 0.0, mse_uncorrected_sum = 0.0, mse_raw_sum = 0.0;
  int64_t with_errors = 0, wins_decoded = 0, wins_raw = 0;
  for (size_t i = 0; i < test_utts.size(); ++i) {
    const Utterance& utt = test_utts[i];
    std::vector<int32_t> corrected = corrections[i].at("units").get<std::vector<int32_t>>();
    std::vector<uint8_t> fill_mask = corrections[i].at("fill_mask").get<std::vector<uint8_t>>();
    const std::vector<int32_t>& input_units = test.items[i].au.units;
    const std::vector<int32_t>& ref_units = ref.items[i].au.units;

    RecoveryCounts rc = recovery_counts(corrected, ref_units, fill_mask);
    recovery.matched += rc.matched;
    recovery.masked += rc.masked;
    for (size_t t = 0; t < corrected.size(); ++t) {
      if (fill_mask[t]) continue;
      ++copy_total;
      if (corrected[t] == input_units[t]) ++copy_ok;
    }

    std::vector<double> corrected_f(corrected_frames[i].data.begin(),
                                    corrected_frames[i].data.end());
    std::vector<double> uncorrected_f = vq.decode(input_units, utt.n_frames);
    double mse_corrected = frame_mse(corrected_f, utt.ref_frames);
    double mse_uncorrected = frame_mse(uncorrected_f, utt.ref_frames);
    double mse_raw = frame_mse(utt.frames, utt.ref_frames);
    mse_corrected_sum += mse_corrected;
    mse_uncorrected_sum += mse_uncorrected;
    mse_raw_sum += mse_raw;

    bool has_error = false;
    for (uint8_t l : utt.error_labels) has_error = has_error || l;
    if (has_error) {
      ++with_errors;
      if (mse_corrected < mse_uncorrected) ++wins_decoded;
      if (mse_corrected < mse_raw) ++wins_raw;
    }
  }
  double n_test = static_cast<double>(test_utts.size());
  int64_t unit_vocab = vq.config().codebook_size;

  nlohmann::json report;
  report["seed"] = cfg_.seed();
  report["preset"] = cfg_.preset();
  report["config_digest"] = digest;
  report["checkpoints"] = {
      {"vq", {{"path", vq_checkpoint()}, {"digest", file_digest(vq_checkpoint())}}},
      {"detector",
       {{"path", detector_checkpoint()}, {"digest", file_digest(detector_checkpoint())}}},
      {"corrector",
       {{"path", corrector_checkpoint()}, {"digest", file_digest(corrector_checkpoint())}}},
  };
  report["detection"] = {
      {"tp", detection_scores.tp},
      {"fp", detection_scores.fp},
      {"fn", detection_scores.fn},
      {"precision", detection_scores.precision},
      {"recall", detection_scores.recall},
      {"f1", detection_scores.f1},
      {"phonemes", phonemes_total},
      {"utterances", test_utts.size()},
      {"positive_rate", positive_rate},
      {"decision_rate", decision_rate},
      {"random_baseline_f1", random_f1},
      {"f1_over_random", random_f1 > 0.0 ? detection_scores.f1 / random_f1 : 0.0},
      {"threshold_H", det_cfg.phoneme_threshold},
      {"l1_clean_below_H_fraction", l1_clean_fraction},
  };
  report["mask_auc"] = {
      {"auc", auc ? nlohmann::json(*auc) : nlohmann::json()},
      {"holdout_utterances", holdout_part.size()},
      {"positions", scores.size()},
  };
  report["correction"] = {
      {"masked_positions", recovery.masked},
      {"recovery_rate", recovery.rate() ? nlohmann::json(*recovery.rate()) : nlohmann::json()},
      {"chance_rate", 1.0 / static_cast<double>(unit_vocab)},
      {"copy_rate", copy_total ? static_cast<double>(copy_ok) / copy_total : 1.0},
      {"frame_mse_corrected_mean", mse_corrected_sum / n_test},
      {"frame_mse_uncorrected_decoded_mean", mse_uncorrected_sum / n_test},
      {"frame_mse_raw_input_mean", mse_raw_sum / n_test},
      {"utterances_with_errors", with_errors},
      {"win_fraction_vs_uncorrected_decoded",
       with_errors ? static_cast<double>(wins_decoded) / with_errors : 0.0},
      {"win_fraction_vs_raw_input",
       with_errors ? static_cast<double>(wins_raw) / with_errors : 0.0},
  };
  write_json(evaluation_json_path(), report);

  // Flat CSV mirror of the report.
  std::string csv = "key,value\n";
  std::function<void(const std::string&, const nlohmann::json&)> flatten =
      [&](const std::string& prefix, const nlohmann::json& j) {
        if (j.is_object()) {
          for (const auto& [k, v] : j.items())
            flatten(prefix.empty() ? k : prefix + "." + k, v);
        } else {
          csv += prefix + "," + j.dump() + "\n";
        }
      };
  flatten("", report);
  atomic_write_text(evaluation_csv_path(), csv);
}

void Pipeline::report_stage() {
  require_artifact(log_path("vq_train"), "train-vq");
  require_artifact(log_path("detector_train"), "train-detector");
  require_artifact(log_path("corrector_train"), "finetune-corrector");
  require_artifact(detection_path(), "detect");
  ensure_dir(svg_dir());

  std::string vq_csv = read_file(log_path("vq_train"));
  atomic_write_text(svg_dir() + "/vq_training.svg",
                    svg::line_chart("unit autoencoder training",
                                    {{"reconstruction mse", "#1f77b4", csv_series(vq_csv, 1)},
                                     {"perplexity", "#2ca02c", csv_series(vq_csv, 3)}},
                                    "step", "value"));
  std::string det_csv = read_file(log_path("detector_train"));
  atomic_write_text(svg_dir() + "/detector_training.svg",
                    svg::line_chart("detector training",
                                    {{"loss", "#1f77b4", csv_series(det_csv, 1)},
                                     {"bce", "#d62728", csv_series(det_csv, 3)}},
                                    "step", "loss"));
  std::string cor_csv = read_file(log_path("corrector_train"));
  atomic_write_text(svg_dir() + "/corrector_training.svg",
                    svg::line_chart("corrector fine-tuning",
                                    {{"ce", "#1f77b4", csv_series(cor_csv, 1)}},
                                    "step", "loss"));

  // Alignment heatmap for the first test utterance carrying a true error:
  // phonemes across, decoder steps down, per-phoneme scores underneath.
  Corpus corpus = load_corpus(corpus_dir());
  const auto& test_utts = corpus.split(kSplitL2Test);
  JoinedSplit test = load_labeled_split(kSplitL2Test);
  Seq2SeqModel detector = load_seq2seq_model(detector_checkpoint(), "detector");
  DetectionConfig det_cfg = cfg_.detection();

  size_t pick = 0;
  for (size_t i = 0; i < test_utts.size(); ++i) {
    bool has_error = false;
    for (uint8_t l : test_utts[i].error_labels) has_error = has_error || l;
    if (has_error) {
      pick = i;
      break;
    }
  }
  const LabeledSequence& item = test.items[pick];
  DetectionResult r = detect(item.au, item.phonemes, detector, det_cfg);

  int64_t t_len = r.alignment.t_len, l_len = r.alignment.phoneme_len;
  const double cell = 14.0, left = 90.0, top = 50.0;
  double heat_w = cell * static_cast<double>(l_len);
  double heat_h = cell * static_cast<double>(t_len);
  double width = left + heat_w + 140.0;
  double height = top + heat_h + 130.0;
  svg::Document doc(width, height);
  doc.rect(0, 0, width, height, "#ffffff");
  doc.text(left, 24, "alignment: " + item.au.id + " (decoder steps x phonemes)", 13);

  double amax = 1e-12;
  for (double a : r.alignment.attention_avg) amax = std::max(amax, a);
  for (int64_t j = 0; j < t_len; ++j)
    for (int64_t i = 0; i < l_len; ++i)
      doc.rect(left + i * cell, top + j * cell, cell, cell,
               svg::gray(r.alignment.attention_avg[j * l_len + i] / amax));
  // error-mask strip on the right
  for (int64_t j = 0; j < t_len; ++j)
    doc.rect(left + heat_w + 16, top + j * cell, cell, cell, svg::gray(r.mask_probs[j]));
  doc.text(left + heat_w + 16, top - 8, "m_hat", 10);

  double bar_y = top + heat_h + 16;
  for (int64_t i = 0; i < l_len; ++i) {
    double score = r.alignment.phoneme_scores[i];
    doc.rect(left + i * cell + 2, bar_y + (1.0 - score) * 40.0, cell - 4, score * 40.0,
             r.alignment.decisions[i] ? "#d62728" : "#1f77b4");
    doc.text(left + i * cell + cell / 2, bar_y + 56,
             "p" + std::to_string(item.phonemes[i]), 8,
             test_utts[pick].error_labels[i] ? "#d62728" : "#333333", "middle");
  }
  doc.line(left, bar_y + (1.0 - det_cfg.phoneme_threshold) * 40.0, left + heat_w,
           bar_y + (1.0 - det_cfg.phoneme_threshold) * 40.0, "#888888", 1.0);
  doc.text(left + heat_w + 6, bar_y + (1.0 - det_cfg.phoneme_threshold) * 40.0 + 3,
           "H", 10, "#888888");
  doc.text(left, bar_y + 80, "E_hat per phoneme; red = flagged, red label = true error", 10);
  atomic_write_text(svg_dir() + "/alignment.svg", doc.str());
}

}  // namespace maulab
