#ifndef MAULAB_CHECKPOINT_HPP
#define MAULAB_CHECKPOINT_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "maulab/tensor.hpp"

namespace maulab {

// Checkpoint layout: magic "MAULAB01", u32 LE header length, UTF-8 JSON
// header (kind, dtype, parameter names + shapes, config snapshot), then the
// raw little-endian float64 payload in header order.

inline constexpr char kCheckpointMagic[] = "MAULAB01";

struct Checkpoint {
  std::string kind;
  nlohmann::json config;
  std::vector<std::string> names;
  std::vector<Shape> shapes;
  std::vector<std::vector<double>> values;

  const std::vector<double>& tensor(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const std::string& kind,
                     std::span<const Tensor> params, const nlohmann::json& config);

Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint values into `params`, matching by name and shape.
void restore_params(const Checkpoint& ckpt, std::span<Tensor> params);

}  // namespace maulab

#endif
