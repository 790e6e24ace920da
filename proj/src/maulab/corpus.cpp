#include "maulab/corpus.hpp"

#include <cmath>
#include <limits>

#include "maulab/error.hpp"
#include "maulab/io.hpp"
#include "maulab/parallel.hpp"

namespace maulab {

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<double> random_unit_vector(Rng& rng, int64_t dim) {
  std::vector<double> v(static_cast<size_t>(dim));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::string split_frames_name(const std::string& split) { return split + ".frames.bin"; }

}  // namespace

void CorpusParams::validate() const {
  if (phoneme_vocab < 2) fail(ErrorKind::Config, "phoneme_vocab must be >= 2");
  if (frame_dim < 2) fail(ErrorKind::Config, "frame_dim must be >= 2");
  if (accent_count < 1 || accent_count > phoneme_vocab)
    fail(ErrorKind::Config, "accent_count must lie in [1, phoneme_vocab]");
  if (error_rate < 0.0 || error_rate > 1.0)
    fail(ErrorKind::Config, "error_rate must lie in [0, 1]");
  if (l1_train_count < 1 || l2_train_count < 1 || l2_test_count < 1)
    fail(ErrorKind::Config, "every split needs at least one utterance");
  if (min_len < 1 || max_len < min_len)
    fail(ErrorKind::Config, "invalid utterance length range");
  if (min_dur < 2 || max_dur < min_dur || max_dur > 32)
    fail(ErrorKind::Config, "phoneme duration range must lie within [2, 32]");
  if (noise_sigma_scale <= 0.0) fail(ErrorKind::Config, "noise_sigma_scale must be > 0");
  if (min_separation <= 0.0) fail(ErrorKind::Config, "min_separation must be > 0");
}

nlohmann::json CorpusParams::to_json() const {
  return {
      {"phoneme_vocab", phoneme_vocab},
      {"frame_dim", frame_dim},
      {"accent_count", accent_count},
      {"error_rate", error_rate},
      {"l1_train_count", l1_train_count},
      {"l2_train_count", l2_train_count},
      {"l2_test_count", l2_test_count},
      {"min_len", min_len},
      {"max_len", max_len},
      {"min_dur", min_dur},
      {"max_dur", max_dur},
      {"noise_sigma_scale", noise_sigma_scale},
      {"min_separation", min_separation},
  };
}

CorpusParams CorpusParams::from_json(const nlohmann::json& j) {
  CorpusParams p;
  p.phoneme_vocab = j.at("phoneme_vocab").get<int64_t>();
  p.frame_dim = j.at("frame_dim").get<int64_t>();
  p.accent_count = j.at("accent_count").get<int64_t>();
  p.error_rate = j.at("error_rate").get<double>();
  p.l1_train_count = j.at("l1_train_count").get<int64_t>();
  p.l2_train_count = j.at("l2_train_count").get<int64_t>();
  p.l2_test_count = j.at("l2_test_count").get<int64_t>();
  p.min_len = j.at("min_len").get<int64_t>();
  p.max_len = j.at("max_len").get<int64_t>();
  p.min_dur = j.at("min_dur").get<int64_t>();
  p.max_dur = j.at("max_dur").get<int64_t>();
  p.noise_sigma_scale = j.at("noise_sigma_scale").get<double>();
  p.min_separation = j.at("min_separation").get<double>();
  return p;
}

PhonemeInventory build_inventory(Rng rng, const CorpusParams& params) {
  params.validate();
  PhonemeInventory inv;
  inv.phoneme_vocab = params.phoneme_vocab;

  // True prototypes: unit vectors with a pairwise separation floor.
  for (int64_t i = 0; i < params.phoneme_vocab; ++i) {
    int attempts = 0;
    while (true) {
      if (++attempts > 20000)
        fail(ErrorKind::Config, "cannot place prototypes at separation " +
                                    std::to_string(params.min_separation));
      std::vector<double> cand = random_unit_vector(rng, params.frame_dim);
      bool ok = true;
      for (const auto& p : inv.prototypes)
        if (distance(cand, p) < params.min_separation) {
          ok = false;
          break;
        }
      if (ok) {
        inv.prototypes.push_back(std::move(cand));
        break;
      }
    }
  }

  // Substitute prototypes: midpoints of two true prototypes, kept away from
  // every other prototype so they read as off-inventory sounds.
  std::vector<int32_t> mapped;
  while (static_cast<int64_t>(mapped.size()) < params.accent_count) {
    int32_t ph = static_cast<int32_t>(rng.uniform_int(params.phoneme_vocab));
    bool used = false;
    for (int32_t m : mapped) used = used || m == ph;
    if (used) continue;
    int attempts = 0;
    while (true) {
      if (++attempts > 20000)
        fail(ErrorKind::Config, "cannot place a substitute prototype for phoneme " +
                                    std::to_string(ph));
      int32_t partner = static_cast<int32_t>(rng.uniform_int(params.phoneme_vocab));
      if (partner == ph) continue;
      std::vector<double> mid(params.frame_dim);
      for (int64_t i = 0; i < params.frame_dim; ++i)
        mid[i] = 0.5 * (inv.prototypes[ph][i] + inv.prototypes[partner][i]);
      bool ok = true;
      for (const auto& p : inv.prototypes)
        if (distance(mid, p) < 0.45 * params.min_separation) {
          ok = false;
          break;
        }
      if (!ok) continue;
      inv.accent_map[ph] = static_cast<int32_t>(inv.prototypes.size());
      inv.prototypes.push_back(std::move(mid));
      mapped.push_back(ph);
      break;
    }
  }

  double min_dist = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < inv.prototypes.size(); ++i)
    for (size_t j = i + 1; j < inv.prototypes.size(); ++j)
      min_dist = std::min(min_dist, distance(inv.prototypes[i], inv.prototypes[j]));
  inv.noise_sigma = params.noise_sigma_scale * min_dist;
  return inv;
}

Utterance generate_utterance(Rng& rng, const PhonemeInventory& inventory, bool is_l2,
                             double error_rate, std::pair<int64_t, int64_t> len_range,
                             std::pair<int64_t, int64_t> dur_range, const std::string& id) {
  if (inventory.prototypes.empty() || inventory.phoneme_vocab < 1)
    fail(ErrorKind::Config, "empty phoneme inventory");
  if (error_rate < 0.0 || error_rate > 1.0)
    fail(ErrorKind::Config, "error_rate must lie in [0, 1]");
  if (dur_range.first < 2 || dur_range.second < dur_range.first || dur_range.second > 32)
    fail(ErrorKind::Config, "duration range must lie within [2, 32]");

  Utterance utt;
  utt.id = id;
  utt.frame_dim = inventory.frame_dim();
  int64_t len = len_range.first + static_cast<int64_t>(rng.uniform_int(
                                      static_cast<uint64_t>(len_range.second - len_range.first + 1)));
  utt.phonemes.resize(static_cast<size_t>(len));
  utt.error_labels.assign(static_cast<size_t>(len), 0);

  std::vector<int32_t> emit(static_cast<size_t>(len));
  std::vector<int64_t> durations(static_cast<size_t>(len));
  for (int64_t i = 0; i < len; ++i) {
    int32_t ph = static_cast<int32_t>(rng.uniform_int(inventory.phoneme_vocab));
    utt.phonemes[i] = ph;
    emit[i] = ph;
    if (is_l2) {
      auto it = inventory.accent_map.find(ph);
      if (it != inventory.accent_map.end() && rng.bernoulli(error_rate)) {
        emit[i] = it->second;
        utt.error_labels[i] = 1;
      }
    }
    durations[i] = dur_range.first + static_cast<int64_t>(rng.uniform_int(
                                         static_cast<uint64_t>(dur_range.second - dur_range.first + 1)));
  }

  int64_t total = 0;
  for (int64_t i = 0; i < len; ++i) {
    utt.frame_spans.emplace_back(total, total + durations[i]);
    total += durations[i];
  }
  utt.n_frames = total;
  utt.frames.resize(static_cast<size_t>(total * utt.frame_dim));
  utt.ref_frames.resize(static_cast<size_t>(total * utt.frame_dim));

  for (int64_t i = 0; i < len; ++i) {
    const auto& proto = inventory.prototypes[emit[i]];
    const auto& ref_proto = inventory.prototypes[utt.phonemes[i]];
    for (int64_t t = utt.frame_spans[i].first; t < utt.frame_spans[i].second; ++t) {
      for (int64_t f = 0; f < utt.frame_dim; ++f) {
        double noise = inventory.noise_sigma * rng.normal();
        utt.frames[t * utt.frame_dim + f] = proto[f] + noise;
        utt.ref_frames[t * utt.frame_dim + f] = ref_proto[f] + noise;
      }
    }
  }
  return utt;
}

const std::vector<Utterance>& Corpus::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) fail(ErrorKind::Contract, "corpus has no split '" + name + "'");
  return it->second;
}

Corpus generate_corpus(uint64_t seed, const CorpusParams& params) {
  params.validate();
  Corpus corpus;
  corpus.seed = seed;
  corpus.params = params;
  Rng root(seed);
  corpus.inventory = build_inventory(root.substream("inventory"), params);

  struct SplitSpec {
    const char* name;
    bool is_l2;
    int64_t count;
  };
  const SplitSpec specs[] = {
      {kSplitL1Train, false, params.l1_train_count},
      {kSplitL2Train, true, params.l2_train_count},
      {kSplitL2Test, true, params.l2_test_count},
  };
  for (const auto& spec : specs) {
    std::vector<Utterance> utts(static_cast<size_t>(spec.count));
    Rng split_rng = root.substream(spec.name);
    parallel_for(spec.count, [&](int64_t i) {
      Rng urng = split_rng.substream(static_cast<uint64_t>(i));
      char id[64];
      std::snprintf(id, sizeof id, "%s-%04lld", spec.name, static_cast<long long>(i));
      utts[i] = generate_utterance(urng, corpus.inventory, spec.is_l2, params.error_rate,
                                   {params.min_len, params.max_len},
                                   {params.min_dur, params.max_dur}, id);
    });
    corpus.splits[spec.name] = std::move(utts);
  }
  return corpus;
}

namespace {

std::vector<FrameRecord> to_frame_records(const std::vector<Utterance>& utts, bool ref) {
  std::vector<FrameRecord> records;
  records.reserve(utts.size());
  for (const Utterance& u : utts) {
    FrameRecord r;
    r.id = u.id;
    r.n_frames = static_cast<uint32_t>(u.n_frames);
    r.dim = static_cast<uint32_t>(u.frame_dim);
    const auto& src = ref ? u.ref_frames : u.frames;
    r.data.resize(src.size());
    for (size_t i = 0; i < src.size(); ++i) r.data[i] = static_cast<float>(src[i]);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& dir, const std::string& config_digest) {
  ensure_dir(dir);
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["seed"] = corpus.seed;
  manifest["config_digest"] = config_digest;
  manifest["params"] = corpus.params.to_json();

  nlohmann::json inv;
  inv["phoneme_vocab"] = corpus.inventory.phoneme_vocab;
  inv["noise_sigma"] = corpus.inventory.noise_sigma;
  nlohmann::json amap = nlohmann::json::object();
  for (const auto& [ph, proto] : corpus.inventory.accent_map)
    amap[std::to_string(ph)] = proto;
  inv["accent_map"] = amap;
  inv["prototypes"] = corpus.inventory.prototypes;
  manifest["inventory"] = inv;

  nlohmann::json splits = nlohmann::json::object();
  for (const auto& [name, utts] : corpus.splits) {
    nlohmann::json split;
    split["frames_file"] = split_frames_name(name);
    bool keep_labels = name != kSplitL2Train;  // l2-train plays the unannotated role
    bool with_ref = name == kSplitL2Test;
    if (with_ref) split["ref_frames_file"] = name + ".ref.frames.bin";
    nlohmann::json list = nlohmann::json::array();
    for (const Utterance& u : utts) {
      nlohmann::json e;
      e["id"] = u.id;
      e["phonemes"] = u.phonemes;
      if (keep_labels) e["labels"] = u.error_labels;
      nlohmann::json spans = nlohmann::json::array();
      for (auto [s, t] : u.frame_spans) spans.push_back({s, t});
      e["frame_spans"] = spans;
      e["n_frames"] = u.n_frames;
      list.push_back(std::move(e));
    }
    split["utterances"] = std::move(list);
    splits[name] = std::move(split);

    auto records = to_frame_records(utts, false);
    write_frames_file(dir + "/" + split_frames_name(name), records);
    write_meta(dir + "/" + split_frames_name(name), "generate", config_digest, corpus.seed);
    if (with_ref) {
      auto ref_records = to_frame_records(utts, true);
      write_frames_file(dir + "/" + name + ".ref.frames.bin", ref_records);
      write_meta(dir + "/" + name + ".ref.frames.bin", "generate", config_digest, corpus.seed);
    }
  }
  manifest["splits"] = std::move(splits);
  write_json(dir + "/manifest.json", manifest);
}

Corpus load_corpus(const std::string& dir) {
  std::string manifest_path = dir + "/manifest.json";
  if (!file_exists(manifest_path))
    fail(ErrorKind::Dependency,
         "missing corpus manifest '" + manifest_path + "'; run the generate stage first");
  nlohmann::json manifest = read_json(manifest_path);

  Corpus corpus;
  corpus.seed = manifest.at("seed").get<uint64_t>();
  corpus.params = CorpusParams::from_json(manifest.at("params"));

  const auto& inv = manifest.at("inventory");
  corpus.inventory.phoneme_vocab = inv.at("phoneme_vocab").get<int64_t>();
  corpus.inventory.noise_sigma = inv.at("noise_sigma").get<double>();
  corpus.inventory.prototypes = inv.at("prototypes").get<std::vector<std::vector<double>>>();
  for (const auto& [key, value] : inv.at("accent_map").items())
    corpus.inventory.accent_map[std::stoi(key)] = value.get<int32_t>();

  for (const auto& [name, split] : manifest.at("splits").items()) {
    auto records = read_frames_file(dir + "/" + split.at("frames_file").get<std::string>());
    std::vector<FrameRecord> ref_records;
    if (split.contains("ref_frames_file"))
      ref_records = read_frames_file(dir + "/" + split.at("ref_frames_file").get<std::string>());

    std::vector<Utterance> utts;
    const auto& list = split.at("utterances");
    if (records.size() != list.size())
      fail(ErrorKind::Io, "frames file for split '" + name + "' does not match manifest");
    for (size_t i = 0; i < list.size(); ++i) {
      const auto& e = list[i];
      Utterance u;
      u.id = e.at("id").get<std::string>();
      if (records[i].id != u.id)
        fail(ErrorKind::Io, "frame record order mismatch at '" + u.id + "'");
      u.phonemes = e.at("phonemes").get<std::vector<int32_t>>();
      if (e.contains("labels")) {
        u.error_labels = e.at("labels").get<std::vector<uint8_t>>();
      } else {
        u.has_labels = false;
      }
      for (const auto& span : e.at("frame_spans"))
        u.frame_spans.emplace_back(span[0].get<int64_t>(), span[1].get<int64_t>());
      u.n_frames = e.at("n_frames").get<int64_t>();
      u.frame_dim = records[i].dim;
      u.frames.assign(records[i].data.begin(), records[i].data.end());
      if (!ref_records.empty()) {
        if (ref_records[i].id != u.id)
          fail(ErrorKind::Io, "reference frame order mismatch at '" + u.id + "'");
        u.ref_frames.assign(ref_records[i].data.begin(), ref_records[i].data.end());
      }
      utts.push_back(std::move(u));
    }
    corpus.splits[name] = std::move(utts);
  }
  return corpus;
}

}  // namespace maulab
