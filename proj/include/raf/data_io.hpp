#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "raf/example.hpp"

namespace raf {

/// Lowercase ASCII letters, delete ASCII punctuation, collapse whitespace runs
/// to one space, trim both ends.
std::string normalize_answer(std::string_view raw);

struct AnswerVocab {
  std::vector<std::string> answers;  ///< index = position
  std::vector<std::size_t> counts;   ///< frequency per answer when built from data, else empty
  std::unordered_map<std::string, std::size_t> index;

  /// Adopts `answers` in order; throws on duplicates.
  static AnswerVocab from_list(std::vector<std::string> answers);

  std::size_t size() const noexcept { return answers.size(); }
  std::optional<std::size_t> find(std::string_view normalized) const;
  bool operator==(const AnswerVocab& o) const { return answers == o.answers; }
};

/// Normalizes, counts and keeps the `k` most frequent answers ordered by
/// (count desc, string asc). With fewer than `k` distinct answers every
/// answer is kept and a warning is appended to `warnings` (when given).
AnswerVocab build_answer_vocab(std::span<const std::string> raw_answers, std::size_t k,
                               std::vector<std::string>* warnings = nullptr);

struct Dataset {
  std::size_t n_q = 1;
  std::size_t n_v = 1;
  std::size_t grid = 1;
  std::size_t objects = 1;
  AnswerVocab vocab;
  std::vector<Example> examples;

  std::size_t size() const noexcept { return examples.size(); }
  /// Every example conforms to the dims, is finite and has answer < |vocab|.
  void validate() const;
};

/// Directory layout: manifest.txt, vocab.txt, features.bin (float32 LE), labels.tsv.
/// The directory must not exist or be empty; it is staged and renamed into place.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

enum class SynthTask { Grid, Object, Joint };
SynthTask parse_task(std::string_view text);
std::string_view task_name(SynthTask t) noexcept;

/// Planted-signal generator settings. Requires n_q >= G + N and n_v >= K + max(G, N).
struct SynthSpec {
  SynthTask task = SynthTask::Grid;
  std::size_t count = 0;
  std::size_t k = 4;
  std::size_t n_q = 24;
  std::size_t n_v = 20;
  std::size_t grid = 16;
  std::size_t objects = 8;
  double sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per example (draws in this order from one Rng): target cell, target
/// object, G cell codes, N object codes, then noise for q, grid rows and
/// object rows. q is onehot(cell) over the first G coordinates and
/// onehot(object) over the next N. Feature row i carries onehot(code_i) in
/// channels [0, K) and a position marker at channel K + i. Labels: grid task
/// the target cell's code, object task the target object's code, joint task
/// their sum mod K. The vocabulary is "class0".."class{K-1}".
Dataset generate_synthetic(const SynthSpec& spec);

/// The planted target cell / object of an example produced by generate_synthetic
/// with sigma = 0 (argmax of the respective one-hot block of q).
std::size_t planted_cell(const Example& ex, std::size_t grid);
std::size_t planted_object(const Example& ex, std::size_t grid, std::size_t objects);

}  // namespace raf
