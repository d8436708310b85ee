#include "ifthen/nn.hpp"

#include <cmath>

#include "ifthen/common.hpp"

namespace ifthen {

ParameterStore::ParameterStore(std::uint64_t seed) : seed_(seed), rng_(seed) {}

Tensor ParameterStore::create(const std::string& name, Shape shape, ParamInit init) {
  if (name.empty()) throw ValidationError("parameter name must be non-empty");
  if (index_.contains(name)) throw ValidationError("duplicate parameter name '" + name + "'");

  const std::size_t n = shape_size(shape);
  std::vector<double> values(n, 0.0);
  switch (init.scheme) {
    case InitScheme::uniform_fanin: {
      if (init.fan_in == 0) throw ValidationError("uniform_fanin init needs fan_in >= 1");
      const double bound = 1.0 / std::sqrt(static_cast<double>(init.fan_in));
      for (double& v : values) v = rng_.uniform(-bound, bound);
      break;
    }
    case InitScheme::zeros:
      break;
    case InitScheme::lstm_bias: {
      if (n % 4 != 0) {
        throw ValidationError("lstm_bias init needs a length divisible by 4, got " +
                              std::to_string(n));
      }
      const std::size_t h = n / 4;
      for (std::size_t i = h; i < 2 * h; ++i) values[i] = 1.0;  // forget gate
      break;
    }
  }

  Tensor t = Tensor::from_data(std::move(shape), std::move(values), /*requires_grad=*/true);
  t.set_name(name);
  index_[name] = entries_.size();
  entries_.push_back({name, t, init});
  return t;
}

Tensor ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return entries_[it->second].tensor;
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const NamedParam& e : entries_) out.push_back(e.tensor);
  return out;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t total = 0;
  for (const NamedParam& e : entries_) total += e.tensor.size();
  return total;
}

void ParameterStore::zero_grads() const {
  for (const NamedParam& e : entries_) e.tensor.zero_grad();
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               bool with_bias) {
  weight = store.create(name + ".weight", {in, out}, {InitScheme::uniform_fanin, in});
  if (with_bias) {
    bias = store.create(name + ".bias", {out}, {InitScheme::zeros});
  }
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  if (bias.defined()) y = add(y, bias);
  return y;
}

Embedding::Embedding(ParameterStore& store, const std::string& name, std::size_t vocab_size,
                     std::size_t dim) {
  table = store.create(name + ".table", {vocab_size, dim}, {InitScheme::uniform_fanin, dim});
}

Tensor Embedding::operator()(std::span<const int> ids, Shape out_prefix) const {
  return embedding_lookup(table, ids, std::move(out_prefix));
}

LstmCell::LstmCell(ParameterStore& store, const std::string& name, std::size_t input_size,
                   std::size_t hidden_size_in)
    : hidden_size(hidden_size_in) {
  w_ih = store.create(name + ".w_ih", {input_size, 4 * hidden_size},
                      {InitScheme::uniform_fanin, input_size});
  w_hh = store.create(name + ".w_hh", {hidden_size, 4 * hidden_size},
                      {InitScheme::uniform_fanin, hidden_size});
  bias = store.create(name + ".bias", {4 * hidden_size}, {InitScheme::lstm_bias});
}

std::pair<Tensor, Tensor> LstmCell::step(const Tensor& x, const Tensor& h, const Tensor& c) const {
  return lstm_cell_step(x, h, c, w_ih, w_hh, bias);
}

Tensor sinusoidal_positions(std::size_t max_len, std::size_t dim) {
  std::vector<double> values(max_len * dim, 0.0);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double rate = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) / rate;
      values[pos * dim + i] = std::sin(angle);
      if (i + 1 < dim) values[pos * dim + i + 1] = std::cos(angle);
    }
  }
  return Tensor::from_data({max_len, dim}, std::move(values));
}

}  // namespace ifthen
