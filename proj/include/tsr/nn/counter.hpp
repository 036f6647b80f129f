#pragma once

#include <cstdint>

namespace tsr::nn {

// Execution counter bumped by every forward kernel. FLOP convention:
// 1 MAC = 2 FLOPs, bias add 1/elem, normalization 2/elem, relu 1/elem,
// elementwise add 1/elem, log-softmax 4/elem. Pure data movement
// (padding, gathers, trims, repeat-upsampling) is not counted.
// Memory traffic: (inputs + outputs + learnable params) * 4 bytes.
struct OpCounter {
  std::uint64_t flops = 0;
  std::uint64_t mem_bytes = 0;

  void reset() { *this = OpCounter{}; }
};

inline OpCounter& op_counter() {
  thread_local OpCounter counter;
  return counter;
}

inline void count_op(std::uint64_t flops, std::uint64_t elems_in, std::uint64_t elems_out,
                     std::uint64_t param_elems) {
  auto& c = op_counter();
  c.flops += flops;
  c.mem_bytes += 4 * (elems_in + elems_out + param_elems);
}

}  // namespace tsr::nn
