#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "raf/data_io.hpp"
#include "raf/raf_model.hpp"

namespace raf {

inline constexpr std::size_t kHumanAnswers = 10;

struct HumanAnswerRecord {
  std::string qid;
  std::array<std::string, kHumanAnswers> answers;
};

/// Number of human answers equal to the prediction after normalize_answer on both sides.
std::size_t count_matches(std::string_view prediction, const HumanAnswerRecord& humans);

/// min(matches / 3, 1). With `subset_average`, the mean of that score over the
/// ten leave-one-out subsets of nine annotators.
double vqa_accuracy(std::string_view prediction, const HumanAnswerRecord& humans, bool subset_average = false);

struct EvalReport {
  double accuracy = 0.0;  ///< mean of scores, 0 for an empty set
  std::vector<double> scores;
  std::vector<std::string> qids;
  std::size_t count = 0;
  std::vector<std::string> warnings;
};

/// Scores answer indices against the dataset: exact label match without
/// `humans`, consensus accuracy of vocab[prediction] with them.
EvalReport evaluate_predictions(std::span<const std::size_t> predictions, const Dataset& data,
                                const std::vector<HumanAnswerRecord>* humans = nullptr, bool subset_average = false);

EvalReport evaluate_dataset(const RafModel& model, const Dataset& data,
                            const std::vector<HumanAnswerRecord>* humans = nullptr, bool subset_average = false);

/// `qid<TAB>a1<TAB>...<TAB>a10` per line.
std::vector<HumanAnswerRecord> read_human_answers(const std::filesystem::path& path);
/// `qid<TAB>answer` per line.
std::vector<std::pair<std::string, std::string>> read_predictions(const std::filesystem::path& path);

/// Consensus accuracy of a predictions file, in prediction file order.
EvalReport score_predictions(std::span<const std::pair<std::string, std::string>> predictions,
                             std::span<const HumanAnswerRecord> humans, bool subset_average = false);

/// Header row then `qid<TAB>branch<TAB>glimpse<TAB>index<TAB>weight`, branch
/// being "image" or "object", for every example, glimpse and location.
void dump_attention(const RafModel& model, const Dataset& data, const std::filesystem::path& path);

}  // namespace raf
