#include "raf/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "raf/binary_io.hpp"
#include "raf/training.hpp"

namespace raf {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

double consensus(std::size_t matches) { return static_cast<double>(std::min<std::size_t>(matches, 3)) / 3.0; }

EvalReport finish(EvalReport r) {
  r.count = r.scores.size();
  if (r.count == 0) {
    r.accuracy = 0.0;
    r.warnings.push_back("empty evaluation set, accuracy reported as 0");
    return r;
  }
  double total = 0.0;
  for (double s : r.scores) total += s;
  r.accuracy = total / static_cast<double>(r.count);
  return r;
}

std::unordered_map<std::string, const HumanAnswerRecord*> index_humans(std::span<const HumanAnswerRecord> humans) {
  std::unordered_map<std::string, const HumanAnswerRecord*> by_qid;
  for (const auto& h : humans) by_qid.emplace(h.qid, &h);
  return by_qid;
}

[[noreturn]] void missing_qids(const std::vector<std::string>& missing) {
  std::string msg = "no human answers for " + std::to_string(missing.size()) + " qid(s):";
  for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
  if (missing.size() > 20) msg += " ...";
  throw std::invalid_argument(msg);
}

}  // namespace

std::size_t count_matches(std::string_view prediction, const HumanAnswerRecord& humans) {
  const std::string p = normalize_answer(prediction);
  return static_cast<std::size_t>(std::count_if(humans.answers.begin(), humans.answers.end(),
                                                [&](const std::string& a) { return normalize_answer(a) == p; }));
}

double vqa_accuracy(std::string_view prediction, const HumanAnswerRecord& humans, bool subset_average) {
  if (!subset_average) return consensus(count_matches(prediction, humans));
  const std::string p = normalize_answer(prediction);
  std::array<bool, kHumanAnswers> hit{};
  std::size_t matches = 0;
  for (std::size_t i = 0; i < kHumanAnswers; ++i) {
    hit[i] = normalize_answer(humans.answers[i]) == p;
    matches += hit[i];
  }
  double total = 0.0;
  for (std::size_t left_out = 0; left_out < kHumanAnswers; ++left_out) total += consensus(matches - hit[left_out]);
  return total / static_cast<double>(kHumanAnswers);
}

EvalReport evaluate_predictions(std::span<const std::size_t> predictions, const Dataset& data,
                                const std::vector<HumanAnswerRecord>* humans, bool subset_average) {
  if (predictions.size() != data.size()) throw ShapeError("evaluate: one prediction per example required");
  EvalReport r;
  r.scores.reserve(data.size());
  if (!humans) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      r.qids.push_back(data.examples[i].qid);
      r.scores.push_back(predictions[i] == data.examples[i].answer ? 1.0 : 0.0);
    }
    return finish(std::move(r));
  }
  const auto by_qid = index_humans(*humans);
  std::vector<std::string> missing;
  for (const auto& ex : data.examples)
    if (!by_qid.contains(ex.qid)) missing.push_back(ex.qid);
  if (!missing.empty()) missing_qids(missing);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data.examples[i];
    if (predictions[i] >= data.vocab.size()) throw ShapeError("evaluate: prediction outside vocabulary");
    r.qids.push_back(ex.qid);
    r.scores.push_back(vqa_accuracy(data.vocab.answers[predictions[i]], *by_qid.at(ex.qid), subset_average));
  }
  return finish(std::move(r));
}

EvalReport evaluate_dataset(const RafModel& model, const Dataset& data, const std::vector<HumanAnswerRecord>* humans,
                            bool subset_average) {
  check_dataset_matches(model.config, data);
  std::vector<std::size_t> predictions;
  predictions.reserve(data.size());
  for (const auto& ex : data.examples) predictions.push_back(predict(model, ex));
  return evaluate_predictions(predictions, data, humans, subset_average);
}

std::vector<HumanAnswerRecord> read_human_answers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open human answers file " + path.string());
  std::vector<HumanAnswerRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 1 + kHumanAnswers) {
      throw FormatError(path.string() + " line " + std::to_string(lineno) + ": expected qid and 10 answers, got " +
                        std::to_string(fields.size()) + " fields");
    }
    HumanAnswerRecord rec;
    rec.qid = fields[0];
    std::move(fields.begin() + 1, fields.end(), rec.answers.begin());
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open predictions file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw FormatError(path.string() + " line " + std::to_string(lineno) + ": expected qid<TAB>answer");
    }
    if (!seen.insert(fields[0]).second) {
      throw FormatError(path.string() + " line " + std::to_string(lineno) + ": duplicate qid " + fields[0]);
    }
    out.emplace_back(fields[0], fields[1]);
  }
  return out;
}

EvalReport score_predictions(std::span<const std::pair<std::string, std::string>> predictions,
                             std::span<const HumanAnswerRecord> humans, bool subset_average) {
  const auto by_qid = index_humans(humans);
  std::vector<std::string> missing;
  for (const auto& [qid, _] : predictions)
    if (!by_qid.contains(qid)) missing.push_back(qid);
  if (!missing.empty()) missing_qids(missing);
  EvalReport r;
  for (const auto& [qid, answer] : predictions) {
    r.qids.push_back(qid);
    r.scores.push_back(vqa_accuracy(answer, *by_qid.at(qid), subset_average));
  }
  return finish(std::move(r));
}

void dump_attention(const RafModel& model, const Dataset& data, const std::filesystem::path& path) {
  check_dataset_matches(model.config, data);
  io::write_file_atomic(
      path,
      [&](std::ostream& os) {
        os << "qid\tbranch\tglimpse\tindex\tweight\n";
        char buf[64];
        auto rows = [&](const std::string& qid, const char* branch, const Tensor& w) {
          for (std::size_t r = 0; r < w.extent(0); ++r)
            for (std::size_t i = 0; i < w.extent(1); ++i) {
              std::snprintf(buf, sizeof buf, "%.17g", w(r, i));
              os << qid << '\t' << branch << '\t' << r << '\t' << i << '\t' << buf << '\n';
            }
        };
        for (const auto& ex : data.examples) {
          const ForwardOutput out = forward(model, ex);
          if (out.image_attention) rows(ex.qid, "image", *out.image_attention);
          if (out.object_attention) rows(ex.qid, "object", *out.object_attention);
        }
      },
      false);
}

}  // namespace raf
