#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ifthen/ops.hpp"
#include "ifthen/rng.hpp"
#include "ifthen/tensor.hpp"

namespace ifthen {

enum class InitScheme {
  uniform_fanin,  // uniform in +-1/sqrt(fan_in)
  zeros,
  lstm_bias,  // zeros with the forget-gate quarter set to 1.0
};

struct ParamInit {
  InitScheme scheme = InitScheme::uniform_fanin;
  std::size_t fan_in = 1;
};

struct NamedParam {
  std::string name;
  Tensor tensor;
  ParamInit init;
};

// Owns every trainable tensor of a model. Creation order is deterministic and
// doubles as the checkpoint serialization order; names must be unique.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed);

  Tensor create(const std::string& name, Shape shape, ParamInit init);
  Tensor get(const std::string& name) const;  // throws ValidationError on miss

  const std::vector<NamedParam>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  std::size_t parameter_count() const;  // total scalar count
  std::uint64_t seed() const { return seed_; }

  void zero_grads() const;

 private:
  std::uint64_t seed_;
  Rng rng_;
  std::vector<NamedParam> entries_;
  std::map<std::string, std::size_t> index_;
};

// y = x W (+ b); weight shape (in, out).
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
         bool with_bias = true);

  Tensor operator()(const Tensor& x) const;

  Tensor weight;
  Tensor bias;  // undefined when constructed without bias
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, const std::string& name, std::size_t vocab_size,
            std::size_t dim);

  // ids of length prod(out_prefix) -> out_prefix + (dim).
  Tensor operator()(std::span<const int> ids, Shape out_prefix) const;

  Tensor table;
};

class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParameterStore& store, const std::string& name, std::size_t input_size,
           std::size_t hidden_size);

  // x (b, input), h/c (b, hidden) -> next (h, c).
  std::pair<Tensor, Tensor> step(const Tensor& x, const Tensor& h, const Tensor& c) const;

  std::size_t hidden_size = 0;
  Tensor w_ih;
  Tensor w_hh;
  Tensor bias;
};

// Fixed sine/cosine position table of shape (max_len, dim); not trainable.
// Even columns carry sin(pos / 10000^(2i/dim)), odd columns the matching cos.
Tensor sinusoidal_positions(std::size_t max_len, std::size_t dim);

}  // namespace ifthen
