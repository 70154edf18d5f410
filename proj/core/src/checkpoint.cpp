/* Copyright 2026 The FuseMT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "fusemt/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fusemt {

namespace {

constexpr std::array<std::string_view, 6> kVariantTags = {"lm", "baseline", "cold", "postnorm", "prenorm", "dynamic"};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_str(std::string& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(const char* what) {
    const std::size_t at = pos_;
    const std::uint32_t n = u32(what);
    if (n > bytes_.size() - pos_) fail(at, std::string(what) + " length " + std::to_string(n) + " runs past the end");
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::string_view raw(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  [[noreturn]] static void fail(std::size_t at, const std::string& msg) {
    throw DataError("checkpoint: " + msg + " at byte offset " + std::to_string(at));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) fail(pos_, std::string("truncated ") + what);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string config_text(const std::map<std::string, std::string>& config) {
  std::string out;
  for (const auto& [k, v] : config) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ContractError("checkpoint: config entry '" + k + "' cannot be stored");
    }
    out += k + "=" + v + "\n";
  }
  return out;
}

std::map<std::string, std::string> parse_config(const std::string& text, std::size_t at) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) Reader::fail(at, "config line '" + line + "' lacks '='");
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

std::size_t to_size(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const unsigned long long n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw DataError("checkpoint: setting " + key + "='" + v + "' is not a count");
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw DataError("checkpoint: setting " + key + "='" + v + "' is not a number");
  }
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
void add_all(Checkpoint& ck, const ParameterSet<T>& params) {
  for (const auto& [name, t] : params) ck.tensors.emplace_back(name, t.template cast<float>());
}

ParameterSet<float> collect(const Checkpoint& ck, std::string_view prefix) {
  ParameterSet<float> out;
  for (const auto& [name, t] : ck.tensors) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.add(name, t);
  }
  return out;
}

std::map<std::string, std::string> lm_settings(const LanguageModel<float>& lm) {
  const auto& c = lm.config();
  return {{"lm.embed_size", std::to_string(c.embed_size)},
          {"lm.hidden_size", std::to_string(c.hidden_size)},
          {"lm.tie_embeddings", c.tie_embeddings ? "1" : "0"},
          {"lm.init_scale", num(c.init_scale)}};
}

LmConfig lm_config_from(const Checkpoint& ck) {
  LmConfig c;
  c.embed_size = to_size(ck.setting("lm.embed_size"), "lm.embed_size");
  c.hidden_size = to_size(ck.setting("lm.hidden_size"), "lm.hidden_size");
  c.tie_embeddings = ck.setting("lm.tie_embeddings") == "1";
  c.init_scale = to_double(ck.setting("lm.init_scale"), "lm.init_scale");
  return c;
}

std::shared_ptr<const LanguageModel<float>> embedded_lm(const Checkpoint& ck) {
  return std::make_shared<const LanguageModel<float>>(Vocabulary::from_text(ck.section("vocab.lm")), lm_config_from(ck),
                                                      collect(ck, "lm."));
}

}  // namespace

const Tensor<float>& Checkpoint::tensor(std::string_view name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("checkpoint has no tensor " + std::string(name));
}

const std::string& Checkpoint::section(std::string_view name) const {
  auto it = sections.find(std::string(name));
  if (it == sections.end()) throw DataError("checkpoint has no section " + std::string(name));
  return it->second;
}

const std::string& Checkpoint::setting(std::string_view key) const {
  auto it = config.find(std::string(key));
  if (it == config.end()) throw DataError("checkpoint config lacks " + std::string(key));
  return it->second;
}

bool known_checkpoint_variant(std::string_view tag) {
  return std::find(kVariantTags.begin(), kVariantTags.end(), tag) != kVariantTags.end();
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  if (!known_checkpoint_variant(ck.variant)) throw ContractError("checkpoint: unknown variant tag '" + ck.variant + "'");
  std::string out(kCheckpointMagic);
  put_str(out, ck.variant);
  put_str(out, config_text(ck.config));
  put_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    put_str(out, name);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  put_u32(out, static_cast<std::uint32_t>(ck.sections.size()));
  for (const auto& [name, text] : ck.sections) {
    put_str(out, name);
    put_str(out, text);
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  const auto magic = bytes.substr(0, kCheckpointMagic.size());
  for (std::size_t i = 0; i < kCheckpointMagic.size(); ++i) {
    if (i >= magic.size() || magic[i] != kCheckpointMagic[i]) Reader::fail(i, "bad magic header");
  }
  r.raw(kCheckpointMagic.size(), "magic");
  Checkpoint ck;
  const std::size_t tag_at = r.offset();
  ck.variant = r.str("variant tag");
  if (!known_checkpoint_variant(ck.variant)) Reader::fail(tag_at, "unknown variant tag '" + ck.variant + "'");
  const std::size_t cfg_at = r.offset();
  ck.config = parse_config(r.str("config"), cfg_at);
  const std::uint32_t n = r.u32("tensor count");
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str("tensor name");
    const std::size_t rank_at = r.offset();
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank > 8) Reader::fail(rank_at, "tensor " + name + " has implausible rank " + std::to_string(rank));
    Shape shape;
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::size_t at = r.offset();
      shape.push_back(r.u32("tensor dim"));
      if (shape.back() == 0) Reader::fail(at, "tensor " + name + " has a zero dimension");
      count *= shape.back();
      if (count > bytes.size()) Reader::fail(at, "tensor " + name + " is larger than the file");
    }
    std::vector<float> data(count);
    for (auto& v : data) v = std::bit_cast<float>(r.u32("tensor data"));
    ck.tensors.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(data)));
  }
  const std::uint32_t ns = r.u32("section count");
  for (std::uint32_t i = 0; i < ns; ++i) {
    std::string name = r.str("section name");
    ck.sections[name] = r.str("section text");
  }
  if (r.offset() != bytes.size()) Reader::fail(r.offset(), "trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::string bytes = serialize_checkpoint(ck);
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::filesystem::remove(tmp);
      throw DataError("failed writing checkpoint " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize_checkpoint(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Checkpoint lm_checkpoint(const LanguageModel<float>& lm, const std::optional<BpeModel>& bpe,
                         const std::map<std::string, std::string>& echo) {
  Checkpoint ck;
  ck.variant = "lm";
  ck.config = echo;
  for (auto& [k, v] : lm_settings(lm)) ck.config[k] = v;
  add_all(ck, lm.params());
  ck.sections["vocab.lm"] = lm.vocab().to_text();
  if (bpe) ck.sections["bpe.lm"] = bpe->to_text();
  return ck;
}

LmBundle lm_from_checkpoint(const Checkpoint& ck) {
  if (ck.variant != "lm") throw DataError("checkpoint holds a '" + ck.variant + "' model, not a language model");
  LmBundle b;
  b.lm = embedded_lm(ck);
  if (ck.sections.count("bpe.lm")) b.bpe = BpeModel::from_text(ck.section("bpe.lm"));
  return b;
}

Checkpoint model_checkpoint(const FusedModel<float>& model, const TextPipeline& text,
                            const std::map<std::string, std::string>& echo) {
  Checkpoint ck;
  ck.variant = std::string(variant_name(model.variant()));
  ck.config = echo;
  const auto& tc = model.tm().config();
  ck.config["tm.embed_size"] = std::to_string(tc.embed_size);
  ck.config["tm.hidden_size"] = std::to_string(tc.hidden_size);
  ck.config["tm.init_scale"] = num(tc.init_scale);
  add_all(ck, model.tm().params());
  add_all(ck, model.head());
  if (model.lm()) {
    for (auto& [k, v] : lm_settings(*model.lm())) ck.config[k] = v;
    add_all(ck, model.lm()->params());
    ck.sections["vocab.lm"] = model.lm()->vocab().to_text();
  }
  ck.sections["vocab.src"] = text.source_vocab.to_text();
  ck.sections["vocab.tgt"] = text.target_vocab.to_text();
  if (text.source_bpe) ck.sections["bpe.src"] = text.source_bpe->to_text();
  if (text.target_bpe) ck.sections["bpe.tgt"] = text.target_bpe->to_text();
  return ck;
}

ModelBundle model_from_checkpoint(const Checkpoint& ck) {
  if (ck.variant == "lm") throw DataError("checkpoint holds a language model, not a translation model");
  const Variant variant = parse_variant(ck.variant);
  ModelBundle b;
  b.text.source_vocab = Vocabulary::from_text(ck.section("vocab.src"));
  b.text.target_vocab = Vocabulary::from_text(ck.section("vocab.tgt"));
  if (ck.sections.count("bpe.src")) b.text.source_bpe = BpeModel::from_text(ck.section("bpe.src"));
  if (ck.sections.count("bpe.tgt")) b.text.target_bpe = BpeModel::from_text(ck.section("bpe.tgt"));
  TmConfig tc;
  tc.embed_size = to_size(ck.setting("tm.embed_size"), "tm.embed_size");
  tc.hidden_size = to_size(ck.setting("tm.hidden_size"), "tm.hidden_size");
  tc.init_scale = to_double(ck.setting("tm.init_scale"), "tm.init_scale");
  tc.output_layer = uses_tm_output(variant);
  TranslationModel<float> tm(b.text.source_vocab, b.text.target_vocab, tc, collect(ck, "tm."));
  std::shared_ptr<const LanguageModel<float>> lm;
  if (uses_lm(variant)) lm = embedded_lm(ck);
  ParameterSet<float> head;
  for (const auto& [name, t] : ck.tensors) {
    if (name.rfind("cold.", 0) == 0 || name.rfind("dyn.", 0) == 0) head.add(name, t);
  }
  b.model = std::make_unique<FusedModel<float>>(variant, std::move(tm), std::move(lm), std::move(head));
  return b;
}

}  // namespace fusemt
