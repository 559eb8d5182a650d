#include "sblstm/net.hpp"

namespace sblstm {

std::int64_t count_parameters(const NetConfig& cfg) {
  cfg.validate();
  const std::int64_t d = cfg.input_dim, h1 = cfg.hidden1, h2 = cfg.hidden2,
                     out = cfg.output_dim;
  return 4 * (d * h1 + h1 * h1 + h1) + 4 * (h1 * h2 + h2 * h2 + h2) +
         (h2 * out + out);
}

}  // namespace sblstm
