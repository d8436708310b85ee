#include "json_util.hpp"

#include <string>
#include <vector>

#include "ifthen/common.hpp"

namespace ifthen {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown(const json& j, const std::vector<std::string>& known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const std::string& k : known) ok = ok || k == key;
    if (!ok) throw ValidationError(std::string(where) + ": unknown config field '" + key + "'");
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_cap(const json& j, const char* key, std::optional<std::size_t>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    out = j.at(key).get<std::size_t>();
  }
}

}  // namespace

ordered_json config_to_json(const ModelConfig& config) {
  ordered_json j;
  if (const auto* lc = std::get_if<LstmEncDecConfig>(&config)) {
    j["embedding_size"] = lc->embedding_size;
    j["hidden_size"] = lc->hidden_size;
    j["dropout"] = lc->dropout;
    j["max_source_len"] = lc->max_source_len;
    j["source_vocab_cap"] = lc->source_vocab_cap ? ordered_json(*lc->source_vocab_cap)
                                                 : ordered_json(nullptr);
  } else if (const auto* sc = std::get_if<StackedRnnConfig>(&config)) {
    j["encoder_layers"] = sc->encoder_layers;
    j["decoder_layers"] = sc->decoder_layers;
    j["embedding_size"] = sc->embedding_size;
    j["hidden_size"] = sc->hidden_size;
    j["dropout"] = sc->dropout;
    j["max_source_len"] = sc->max_source_len;
    j["source_vocab_cap"] = sc->source_vocab_cap ? ordered_json(*sc->source_vocab_cap)
                                                 : ordered_json(nullptr);
  } else {
    const auto& tc = std::get<TransformerConfig>(config);
    j["layers"] = tc.layers;
    j["heads"] = tc.heads;
    j["model_size"] = tc.model_size;
    j["feed_forward_size"] = tc.feed_forward_size;
    j["dropout"] = tc.dropout;
    j["max_source_len"] = tc.max_source_len;
    j["source_vocab_cap"] =
        tc.source_vocab_cap ? ordered_json(*tc.source_vocab_cap) : ordered_json(nullptr);
    j["additive_attention"] = tc.additive_attention;
  }
  return j;
}

ModelConfig config_from_json(Arch arch, const json& j) {
  switch (arch) {
    case Arch::lstm: {
      LstmEncDecConfig c;
      reject_unknown(
          j, {"embedding_size", "hidden_size", "dropout", "max_source_len", "source_vocab_cap"},
          "lstm config");
      read_field(j, "embedding_size", c.embedding_size);
      read_field(j, "hidden_size", c.hidden_size);
      read_field(j, "dropout", c.dropout);
      read_field(j, "max_source_len", c.max_source_len);
      read_cap(j, "source_vocab_cap", c.source_vocab_cap);
      return c;
    }
    case Arch::stacked_rnn: {
      StackedRnnConfig c;
      reject_unknown(j,
                     {"encoder_layers", "decoder_layers", "embedding_size", "hidden_size",
                      "dropout", "max_source_len", "source_vocab_cap"},
                     "stacked_rnn config");
      read_field(j, "encoder_layers", c.encoder_layers);
      read_field(j, "decoder_layers", c.decoder_layers);
      read_field(j, "embedding_size", c.embedding_size);
      read_field(j, "hidden_size", c.hidden_size);
      read_field(j, "dropout", c.dropout);
      read_field(j, "max_source_len", c.max_source_len);
      read_cap(j, "source_vocab_cap", c.source_vocab_cap);
      return c;
    }
    case Arch::transformer: {
      TransformerConfig c;
      reject_unknown(j,
                     {"layers", "heads", "model_size", "feed_forward_size", "dropout",
                      "max_source_len", "source_vocab_cap", "additive_attention"},
                     "transformer config");
      read_field(j, "layers", c.layers);
      read_field(j, "heads", c.heads);
      read_field(j, "model_size", c.model_size);
      read_field(j, "feed_forward_size", c.feed_forward_size);
      read_field(j, "dropout", c.dropout);
      read_field(j, "max_source_len", c.max_source_len);
      read_cap(j, "source_vocab_cap", c.source_vocab_cap);
      read_field(j, "additive_attention", c.additive_attention);
      return c;
    }
  }
  throw ValidationError("unknown architecture tag");
}

}  // namespace ifthen
