#include "maulab/checkpoint.hpp"

#include <cstring>

#include "maulab/io.hpp"

namespace maulab {

const std::vector<double>& Checkpoint::tensor(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  fail(ErrorKind::Config, "checkpoint has no parameter named '" + name + "'");
}

void save_checkpoint(const std::string& path, const std::string& kind,
                     std::span<const Tensor> params, const nlohmann::json& config) {
  nlohmann::json header;
  header["format"] = kCheckpointMagic;
  header["kind"] = kind;
  header["dtype"] = "float64";
  header["config"] = config;
  nlohmann::json plist = nlohmann::json::array();
  for (const Tensor& p : params) {
    plist.push_back({{"name", p.name()}, {"shape", p.shape()}});
  }
  header["params"] = plist;

  std::string header_text = header.dump();
  std::string out;
  out.append(kCheckpointMagic, 8);
  uint32_t hlen = static_cast<uint32_t>(header_text.size());
  char lenb[4] = {static_cast<char>(hlen & 0xff), static_cast<char>((hlen >> 8) & 0xff),
                  static_cast<char>((hlen >> 16) & 0xff), static_cast<char>((hlen >> 24) & 0xff)};
  out.append(lenb, 4);
  out += header_text;
  for (const Tensor& p : params) {
    auto data = p.data();
    size_t at = out.size();
    out.resize(out.size() + data.size() * sizeof(double));
    std::memcpy(out.data() + at, data.data(), data.size() * sizeof(double));
  }
  atomic_write_file(path, std::span<const char>(out.data(), out.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string buf = read_file(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), kCheckpointMagic, 8) != 0)
    fail(ErrorKind::Io, "'" + path + "' is not a checkpoint (bad magic)");
  uint32_t hlen = static_cast<uint8_t>(buf[8]) | (static_cast<uint8_t>(buf[9]) << 8) |
                  (static_cast<uint8_t>(buf[10]) << 16) | (static_cast<uint8_t>(buf[11]) << 24);
  if (12 + static_cast<size_t>(hlen) > buf.size())
    fail(ErrorKind::Io, "'" + path + "' has a truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(12, hlen));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Io, "'" + path + "' has an invalid header: " + e.what());
  }
  Checkpoint ckpt;
  ckpt.kind = header.value("kind", "");
  ckpt.config = header.value("config", nlohmann::json::object());

  size_t pos = 12 + hlen;
  for (const auto& entry : header.at("params")) {
    std::string name = entry.at("name").get<std::string>();
    Shape shape = entry.at("shape").get<Shape>();
    size_t n = static_cast<size_t>(shape_numel(shape));
    if (pos + n * sizeof(double) > buf.size())
      fail(ErrorKind::Io, "'" + path + "' is truncated at parameter '" + name + "'");
    std::vector<double> values(n);
    std::memcpy(values.data(), buf.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
    ckpt.names.push_back(std::move(name));
    ckpt.shapes.push_back(std::move(shape));
    ckpt.values.push_back(std::move(values));
  }
  return ckpt;
}

void restore_params(const Checkpoint& ckpt, std::span<Tensor> params) {
  for (Tensor& p : params) {
    bool found = false;
    for (size_t i = 0; i < ckpt.names.size(); ++i) {
      if (ckpt.names[i] != p.name()) continue;
      if (ckpt.shapes[i] != p.shape()) {
        fail(ErrorKind::Config, "checkpoint parameter '" + p.name() + "' has shape " +
                                    shape_str(ckpt.shapes[i]) + ", model expects " +
                                    shape_str(p.shape()));
      }
      p.mutable_value() = ckpt.values[i];
      found = true;
      break;
    }
    if (!found)
      fail(ErrorKind::Config, "checkpoint is missing parameter '" + p.name() + "'");
  }
}

}  // namespace maulab
