#include "raf/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include "raf/binary_io.hpp"

namespace fs = std::filesystem;

namespace raf {

namespace io {

void write_file_atomic(const fs::path& path, const std::function<void(std::ostream&)>& body, bool binary) {
  fs::path tmp = path;
  tmp += ".tmp";
  try {
    {
      std::ofstream os(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
      if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
      body(os);
      os.flush();
      if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

}  // namespace io

std::string normalize_answer(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::ispunct(c)) continue;
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

AnswerVocab AnswerVocab::from_list(std::vector<std::string> answers) {
  AnswerVocab v;
  v.answers = std::move(answers);
  for (std::size_t i = 0; i < v.answers.size(); ++i) {
    if (!v.index.emplace(v.answers[i], i).second) throw FormatError("duplicate vocabulary entry '" + v.answers[i] + "'");
  }
  return v;
}

std::optional<std::size_t> AnswerVocab::find(std::string_view normalized) const {
  const auto it = index.find(std::string(normalized));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

AnswerVocab build_answer_vocab(std::span<const std::string> raw_answers, std::size_t k,
                               std::vector<std::string>* warnings) {
  if (k == 0) throw std::invalid_argument("vocabulary size must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& a : raw_answers) ++freq[normalize_answer(a)];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() < k) {
    if (warnings) {
      warnings->push_back("only " + std::to_string(ranked.size()) + " distinct answers, fewer than the requested " +
                          std::to_string(k));
    }
  } else {
    ranked.resize(k);
  }
  std::vector<std::string> answers;
  std::vector<std::size_t> counts;
  for (auto& [a, n] : ranked) {
    answers.push_back(a);
    counts.push_back(n);
  }
  AnswerVocab v = AnswerVocab::from_list(std::move(answers));
  v.counts = std::move(counts);
  return v;
}

void Dataset::validate() const {
  if (n_q == 0 || n_v == 0 || grid == 0 || objects == 0) throw ShapeError("dataset dims must be >= 1");
  const std::vector<std::size_t> grid_shape{grid, n_v}, object_shape{objects, n_v};
  for (const auto& ex : examples) {
    if (ex.q.size() != n_q || ex.grid.shape() != grid_shape || ex.objects.shape() != object_shape) {
      throw ShapeError("example '" + ex.qid + "' does not conform to dataset dims");
    }
    if (ex.answer >= vocab.size()) {
      throw ShapeError("example '" + ex.qid + "' answer " + std::to_string(ex.answer) + " outside vocabulary of " +
                       std::to_string(vocab.size()));
    }
    if (!all_finite(ex.q) || !all_finite(ex.grid.data()) || !all_finite(ex.objects.data())) {
      throw NumericError("example '" + ex.qid + "' holds non-finite features");
    }
    if (ex.qid.empty() || ex.qid.find_first_of("\t\n\r") != std::string::npos) {
      throw FormatError("qid '" + ex.qid + "' is empty or contains tab/newline");
    }
  }
}

namespace {

constexpr const char* kManifest = "manifest.txt";

void write_floats(std::ostream& os, std::span<const double> xs) {
  for (double x : xs) io::write_f32(os, static_cast<float>(x));
}

void read_floats(std::istream& is, std::span<double> out, const std::string& qid) {
  std::vector<char> buf(out.size() * 4);
  if (!is.read(buf.data(), static_cast<std::streamsize>(buf.size()))) {
    throw FormatError("features.bin: short read in record for '" + qid + "'");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i * 4 + b])) << (8 * b);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
}

std::size_t parse_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError(std::string(kManifest) + ": missing key '" + key + "'");
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(it->second, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != it->second.size()) {
    throw FormatError(std::string(kManifest) + ": key '" + key + "' is not an unsigned integer: '" + it->second + "'");
  }
  return static_cast<std::size_t>(v);
}

std::string parse_name(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end() || it->second.empty()) throw FormatError(std::string(kManifest) + ": missing key '" + key + "'");
  return it->second;
}

}  // namespace

void write_dataset(const Dataset& data, const fs::path& dir) {
  data.validate();
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
    throw std::runtime_error("output directory " + dir.string() + " exists and is not empty");
  }
  fs::path staging = dir;
  staging += ".staging";
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging);
  try {
    {
      std::ofstream m(staging / kManifest);
      m << "version=1\n"
        << "count=" << data.size() << '\n'
        << "n_q=" << data.n_q << '\n'
        << "n_v=" << data.n_v << '\n'
        << "grid=" << data.grid << '\n'
        << "objects=" << data.objects << '\n'
        << "vocab=vocab.txt\n"
        << "features=features.bin\n"
        << "labels=labels.tsv\n";
      if (!m) throw std::runtime_error("failed to write manifest");
    }
    {
      std::ofstream v(staging / "vocab.txt");
      for (const auto& a : data.vocab.answers) v << a << '\n';
      if (!v) throw std::runtime_error("failed to write vocab.txt");
    }
    {
      std::ofstream f(staging / "features.bin", std::ios::binary);
      for (const auto& ex : data.examples) {
        write_floats(f, ex.q);
        write_floats(f, ex.grid.data());
        write_floats(f, ex.objects.data());
      }
      if (!f) throw std::runtime_error("failed to write features.bin");
    }
    {
      std::ofstream l(staging / "labels.tsv");
      for (const auto& ex : data.examples) l << ex.qid << '\t' << ex.answer << '\n';
      if (!l) throw std::runtime_error("failed to write labels.tsv");
    }
    if (fs::exists(dir)) fs::remove(dir);
    fs::rename(staging, dir);
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

Dataset read_dataset(const fs::path& dir) {
  std::ifstream mf(dir / kManifest);
  if (!mf) throw FormatError("cannot open " + (dir / kManifest).string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(mf, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(std::string(kManifest) + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (parse_size(kv, "version") != 1) throw FormatError(std::string(kManifest) + ": unsupported version");

  Dataset data;
  const std::size_t count = parse_size(kv, "count");
  data.n_q = parse_size(kv, "n_q");
  data.n_v = parse_size(kv, "n_v");
  data.grid = parse_size(kv, "grid");
  data.objects = parse_size(kv, "objects");
  if (data.n_q == 0 || data.n_v == 0 || data.grid == 0 || data.objects == 0) {
    throw FormatError(std::string(kManifest) + ": dims must be >= 1");
  }

  {
    std::ifstream vf(dir / parse_name(kv, "vocab"));
    if (!vf) throw FormatError("cannot open vocabulary file");
    std::vector<std::string> answers;
    while (std::getline(vf, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      answers.push_back(line);
    }
    data.vocab = AnswerVocab::from_list(std::move(answers));
  }

  std::vector<std::pair<std::string, std::size_t>> labels;
  {
    std::ifstream lf(dir / parse_name(kv, "labels"));
    if (!lf) throw FormatError("cannot open labels file");
    std::size_t lineno = 0;
    while (std::getline(lf, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw FormatError("labels.tsv line " + std::to_string(lineno) + ": missing tab");
      std::size_t pos = 0;
      unsigned long long idx = 0;
      const std::string field = line.substr(tab + 1);
      try {
        idx = std::stoull(field, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != field.size()) {
        throw FormatError("labels.tsv line " + std::to_string(lineno) + ": bad answer index");
      }
      labels.emplace_back(line.substr(0, tab), static_cast<std::size_t>(idx));
    }
  }
  if (labels.size() != count) {
    throw FormatError("labels.tsv has " + std::to_string(labels.size()) + " rows, manifest count is " +
                      std::to_string(count));
  }

  const fs::path feat_path = dir / parse_name(kv, "features");
  const std::uintmax_t record_bytes = 4ull * (data.n_q + (data.grid + data.objects) * data.n_v);
  std::error_code ec;
  const std::uintmax_t actual = fs::file_size(feat_path, ec);
  if (ec) throw FormatError("cannot stat " + feat_path.string());
  if (actual != record_bytes * count) {
    throw FormatError("features.bin holds " + std::to_string(actual) + " bytes, manifest implies " +
                      std::to_string(count) + " records of " + std::to_string(record_bytes) + " bytes");
  }
  std::ifstream ff(feat_path, std::ios::binary);
  if (!ff) throw FormatError("cannot open " + feat_path.string());
  data.examples.reserve(count);
  for (auto& [qid, answer] : labels) {
    Example ex;
    ex.qid = qid;
    ex.answer = answer;
    ex.q.resize(data.n_q);
    ex.grid = Tensor::zeros({data.grid, data.n_v});
    ex.objects = Tensor::zeros({data.objects, data.n_v});
    read_floats(ff, ex.q, qid);
    read_floats(ff, ex.grid.data(), qid);
    read_floats(ff, ex.objects.data(), qid);
    data.examples.push_back(std::move(ex));
  }
  try {
    data.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("dataset ") + dir.string() + ": " + e.what());
  }
  return data;
}

}  // namespace raf
