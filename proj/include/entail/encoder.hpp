#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "entail/error.hpp"
#include "entail/text.hpp"

namespace entail {

using Vec = std::vector<double>;

enum class Mode { kTrain, kEval };

// Strings in, fixed-dimension vectors out. Queries and premise-hypothesis
// sequences go through the same encoder (shared weights).
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual std::size_t dim() const = 0;
  virtual Vec encode(std::string_view text) const = 0;
  virtual std::string_view separator() const { return kSeparator; }

  Vec encode_query(std::string_view query) const {
    if (trim(query).empty()) throw Error("cannot encode an empty query");
    return encode(query);
  }

  Vec encode_premise_hypothesis(std::string_view premise, std::string_view hypothesis) const {
    return encode(premise_hypothesis_sequence(premise, hypothesis));
  }

  std::string premise_hypothesis_sequence(std::string_view premise,
                                          std::string_view hypothesis) const {
    if (trim(hypothesis).empty()) throw Error("cannot encode an empty hypothesis");
    std::string seq(premise);
    seq += ' ';
    seq += separator();
    seq += ' ';
    seq += hypothesis;
    return seq;
  }
};

// Whitespace tokenizer that also splits off punctuation. Bracketed special
// tokens ("[SEP]") and the literal "NULL" survive intact; everything else is
// lowercased.
class Tokenizer {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kSep = 1;
  static constexpr int kNull = 2;

  Tokenizer() : Tokenizer(std::vector<std::string>{}) {}

  // `words` are added after the reserved tokens, sorted and deduplicated.
  explicit Tokenizer(const std::vector<std::string>& words) {
    vocab_ = {"[UNK]", std::string(kSeparator), std::string(kNullPremise)};
    std::set<std::string> extra(words.begin(), words.end());
    for (const auto& w : vocab_) extra.erase(w);
    vocab_.insert(vocab_.end(), extra.begin(), extra.end());
    for (std::size_t i = 0; i < vocab_.size(); ++i) ids_[vocab_[i]] = static_cast<int>(i);
  }

  static Tokenizer from_vocab(std::vector<std::string> vocab) {
    Tokenizer t;
    if (vocab.size() < 3 || vocab[0] != "[UNK]" || vocab[1] != kSeparator ||
        vocab[2] != kNullPremise) {
      throw Error("vocabulary must start with [UNK], [SEP], NULL");
    }
    t.vocab_ = std::move(vocab);
    t.ids_.clear();
    for (std::size_t i = 0; i < t.vocab_.size(); ++i) {
      if (!t.ids_.emplace(t.vocab_[i], static_cast<int>(i)).second) {
        throw Error("duplicate vocabulary entry '" + t.vocab_[i] + "'");
      }
    }
    return t;
  }

  static std::vector<std::string> split(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    };
    std::size_t i = 0;
    while (i < text.size()) {
      const char c = text[i];
      if (c == '[') {
        auto close = text.find(']', i);
        if (close != std::string_view::npos && close - i <= 8) {
          auto tok = text.substr(i, close - i + 1);
          bool word = std::all_of(tok.begin() + 1, tok.end() - 1, [](char ch) {
            return std::isupper(static_cast<unsigned char>(ch));
          });
          if (word && tok.size() > 2) {
            flush();
            out.emplace_back(tok);
            i = close + 1;
            continue;
          }
        }
      }
      const auto uc = static_cast<unsigned char>(c);
      if (std::isspace(uc)) {
        flush();
      } else if (std::ispunct(uc) && c != '-' && c != '_' && c != '\'') {
        flush();
        out.emplace_back(1, c);
      } else {
        cur.push_back(c);
      }
      ++i;
    }
    flush();
    for (auto& t : out) {
      if (t == kNullPremise || t.front() == '[') continue;
      for (auto& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    return out;
  }

  std::vector<int> encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& tok : split(text)) {
      auto it = ids_.find(tok);
      ids.push_back(it == ids_.end() ? kUnk : it->second);
    }
    return ids;
  }

  std::size_t size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> ids_;
};

// Vocabulary over every token in `corpus`.
inline Tokenizer build_tokenizer(const std::vector<std::string>& corpus) {
  std::set<std::string> words;
  for (const auto& s : corpus) {
    for (auto& t : Tokenizer::split(s)) words.insert(std::move(t));
  }
  return Tokenizer(std::vector<std::string>(words.begin(), words.end()));
}

struct ToyEncoderShape {
  std::size_t embed_dim = 32;
  std::size_t out_dim = 32;
};

// Desk-scale trainable encoder: token embedding table, mean pooling, one tanh
// projection. Parameters live in one flat vector laid out as
//   [ embeddings (V x e) | projection W (d x e) | bias (d) ].
class ToyEncoder : public Encoder {
 public:
  struct Forward {
    std::vector<int> tokens;
    Vec pooled;  // e
    Vec out;     // d, tanh(W pooled + b)
  };

  ToyEncoder(Tokenizer tokenizer, ToyEncoderShape shape, std::uint64_t seed)
      : tok_(std::move(tokenizer)), shape_(shape) {
    check_shape();
    params_.assign(param_count(), 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> emb(-0.1, 0.1);
    for (std::size_t i = 0; i < embeddings_size(); ++i) params_[i] = emb(rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(shape_.embed_dim));
    std::uniform_real_distribution<double> proj(-bound, bound);
    for (std::size_t i = 0; i < shape_.out_dim * shape_.embed_dim; ++i) {
      params_[weight_offset() + i] = proj(rng);
    }
  }

  ToyEncoder(Tokenizer tokenizer, ToyEncoderShape shape, Vec params)
      : tok_(std::move(tokenizer)), shape_(shape), params_(std::move(params)) {
    check_shape();
    if (params_.size() != param_count()) {
      throw Error("toy encoder: expected " + std::to_string(param_count()) +
                  " parameters, got " + std::to_string(params_.size()));
    }
  }

  std::size_t dim() const override { return shape_.out_dim; }

  Vec encode(std::string_view text) const override { return forward(text).out; }

  Forward forward(std::string_view text) const {
    if (trim(text).empty()) throw Error("cannot encode an empty string");
    auto tokens = tok_.encode(text);
    if (tokens.empty()) throw Error("string has no tokens: '" + std::string(text) + "'");
    return forward_tokens(std::move(tokens));
  }

  Forward forward_tokens(std::vector<int> tokens) const {
    const std::size_t e = shape_.embed_dim;
    const std::size_t d = shape_.out_dim;
    Forward f;
    f.tokens = std::move(tokens);
    f.pooled.assign(e, 0.0);
    for (int t : f.tokens) {
      const auto row = embedding_row(t);
      for (std::size_t k = 0; k < e; ++k) f.pooled[k] += row[k];
    }
    const double inv = 1.0 / static_cast<double>(f.tokens.size());
    for (auto& v : f.pooled) v *= inv;
    f.out.assign(d, 0.0);
    const double* w = params_.data() + weight_offset();
    const double* b = params_.data() + bias_offset();
    for (std::size_t r = 0; r < d; ++r) {
      double z = b[r];
      for (std::size_t k = 0; k < e; ++k) z += w[r * e + k] * f.pooled[k];
      f.out[r] = std::tanh(z);
    }
    return f;
  }

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(out).
  void backward(const Forward& f, std::span<const double> grad_out, std::span<double> grad) const {
    const std::size_t e = shape_.embed_dim;
    const std::size_t d = shape_.out_dim;
    const double* w = params_.data() + weight_offset();
    double* gw = grad.data() + weight_offset();
    double* gb = grad.data() + bias_offset();
    Vec g_pooled(e, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
      const double gz = grad_out[r] * (1.0 - f.out[r] * f.out[r]);
      if (gz == 0.0) continue;
      gb[r] += gz;
      for (std::size_t k = 0; k < e; ++k) {
        gw[r * e + k] += gz * f.pooled[k];
        g_pooled[k] += gz * w[r * e + k];
      }
    }
    const double inv = 1.0 / static_cast<double>(f.tokens.size());
    for (int t : f.tokens) {
      double* row = grad.data() + static_cast<std::size_t>(t) * e;
      for (std::size_t k = 0; k < e; ++k) row[k] += g_pooled[k] * inv;
    }
  }

  std::span<const double> embedding_row(int token) const {
    return {params_.data() + static_cast<std::size_t>(token) * shape_.embed_dim,
            shape_.embed_dim};
  }

  const Tokenizer& tokenizer() const { return tok_; }
  const ToyEncoderShape& shape() const { return shape_; }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  std::size_t embeddings_size() const { return tok_.size() * shape_.embed_dim; }
  std::size_t weight_offset() const { return embeddings_size(); }
  std::size_t bias_offset() const { return weight_offset() + shape_.out_dim * shape_.embed_dim; }
  std::size_t param_count() const { return bias_offset() + shape_.out_dim; }

 private:
  void check_shape() const {
    if (shape_.embed_dim == 0 || shape_.out_dim == 0) {
      throw Error("toy encoder dimensions must be positive");
    }
  }

  Tokenizer tok_;
  ToyEncoderShape shape_;
  Vec params_;
  Mode mode_ = Mode::kEval;
};

}  // namespace entail
