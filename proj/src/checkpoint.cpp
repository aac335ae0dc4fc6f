#include <fstream>
#include <iterator>

#include "raf/binary_io.hpp"
#include "raf/training.hpp"

namespace raf {

namespace {

constexpr char kMagic[4] = {'R', 'A', 'F', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_tensor(std::ostream& os, const Tensor& t) {
  for (double x : t.data()) io::write_f64(os, x);
}

void read_tensor(std::istream& is, Tensor& t) {
  for (double& x : t.data()) x = io::read_f64(is, "checkpoint tensor data");
}

}  // namespace

void save_checkpoint(const RafModel& model, const AdamState* adam, const std::filesystem::path& path) {
  model.validate();
  const auto tensors = model.tensors();
  if (adam && (adam->first_moment.size() != tensors.size() || adam->second_moment.size() != tensors.size())) {
    throw ShapeError("save_checkpoint: optimizer state does not match the model");
  }
  const auto& c = model.config;
  io::write_file_atomic(path, [&](std::ostream& os) {
    os.write(kMagic, 4);
    io::write_u32(os, kVersion);
    for (std::size_t d : {c.n_q, c.n_v, c.grid, c.objects, c.t_q, c.t_v, c.t_rho, c.glimpses, c.n_answers}) {
      if (d > 0xffffffffu) throw ShapeError("save_checkpoint: dimension exceeds 32 bits");
      io::write_u32(os, static_cast<std::uint32_t>(d));
    }
    os.put(static_cast<char>(c.variant));
    io::write_le<std::uint64_t>(os, c.seed);
    for (const Tensor* t : tensors) write_tensor(os, *t);
    os.put(adam ? 1 : 0);
    if (adam) {
      io::write_le<std::uint64_t>(os, adam->step);
      for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (!adam->first_moment[i].same_shape(*tensors[i])) throw ShapeError("save_checkpoint: moment shape mismatch");
        write_tensor(os, adam->first_moment[i]);
      }
      for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (!adam->second_moment[i].same_shape(*tensors[i])) throw ShapeError("save_checkpoint: moment shape mismatch");
        write_tensor(os, adam->second_moment[i]);
      }
    }
  });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  }
  const std::uint32_t version = io::read_u32(is, "checkpoint version");
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  std::size_t* dims[] = {&cfg.n_q, &cfg.n_v, &cfg.grid, &cfg.objects, &cfg.t_q,
                         &cfg.t_v, &cfg.t_rho, &cfg.glimpses, &cfg.n_answers};
  for (std::size_t* d : dims) *d = io::read_u32(is, "checkpoint dims");
  const int variant = is.get();
  if (variant == std::char_traits<char>::eof()) throw FormatError(path.string() + ": truncated header");
  if (variant < 0 || variant > 2) throw FormatError(path.string() + ": unknown variant byte " + std::to_string(variant));
  cfg.variant = static_cast<Variant>(variant);
  cfg.seed = io::read_le<std::uint64_t>(is, "checkpoint seed");
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }

  // Size check before allocating, so a corrupted header cannot request a huge model.
  // Counted in long double so that absurd dims cannot wrap around.
  const auto count = [](const FusionDims& d) {
    const long double q = d.n_q, v = d.n_v, tq = d.t_q, tv = d.t_v, tr = d.t_rho, o = d.n_out;
    return q * tq + v * tv + tq * tv * tr + tr * o;
  };
  const long double entries =
      count(cfg.final_fusion_dims()) + static_cast<long double>(cfg.branches()) * count(cfg.branch_fusion_dims());
  const long double header = 4 + 4 + 9 * 4 + 1 + 8;
  std::error_code ec;
  const std::uint64_t file_bytes = std::filesystem::file_size(path, ec);
  const long double needed = header + 8.0L * entries + 1.0L;
  if (ec || static_cast<long double>(file_bytes) < needed) {
    throw FormatError(path.string() + ": truncated checkpoint (" + std::to_string(file_bytes) + " bytes, parameters need " +
                      std::to_string(static_cast<double>(needed)) + ")");
  }

  Checkpoint ck{RafModel::zeros(cfg), std::nullopt};
  for (Tensor* t : ck.model.tensors()) read_tensor(is, *t);
  const int flag = is.get();
  if (flag == std::char_traits<char>::eof()) throw FormatError(path.string() + ": truncated before optimizer flag");
  if (flag == 1) {
    AdamState s = make_adam_state(ck.model);
    s.step = io::read_le<std::uint64_t>(is, "optimizer step");
    for (Tensor& t : s.first_moment) read_tensor(is, t);
    for (Tensor& t : s.second_moment) read_tensor(is, t);
    ck.adam = std::move(s);
  } else if (flag != 0) {
    throw FormatError(path.string() + ": bad optimizer flag " + std::to_string(flag));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes after checkpoint");
  try {
    ck.model.validate();
  } catch (const std::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!ck.model.config.same_architecture(expected)) {
    const auto& c = ck.model.config;
    throw FormatError(path.string() + ": checkpoint dims (n_q=" + std::to_string(c.n_q) + ", n_v=" +
                      std::to_string(c.n_v) + ", G=" + std::to_string(c.grid) + ", N=" + std::to_string(c.objects) +
                      ", t=" + std::to_string(c.t_q) + "/" + std::to_string(c.t_v) + "/" + std::to_string(c.t_rho) +
                      ", g=" + std::to_string(c.glimpses) + ", answers=" + std::to_string(c.n_answers) +
                      ", variant=" + std::string(variant_name(c.variant)) + ") differ from the requested config");
  }
  return ck;
}

}  // namespace raf
