#pragma once

// On-disk artifacts: field snapshots, checkpoints and CSV tables.
//
// Snapshot layout: "TMF1", u32 n, u32 m, f64 time, then n * m^n f64 samples,
// component-major then row-major, all little-endian.

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "tmf/config.hpp"
#include "tmf/engine.hpp"

namespace tmf {

class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("snapshot: truncated file");
  unsigned char b[sizeof(T)];
  std::memcpy(b, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace detail

struct Snapshot {
  VectorField field;
  double time = 0.0;
};

inline std::string encode_snapshot(const VectorField& f, double time) {
  std::string out = "TMF1";
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid.dim()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid.m()));
  detail::put_le<double>(out, time);
  out.reserve(out.size() + f.data.size() * sizeof(double));
  for (double x : f.data) detail::put_le<double>(out, x);
  return out;
}

inline Snapshot decode_snapshot(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "TMF1") != 0) throw IoError("snapshot: bad magic");
  std::size_t pos = 4;
  const auto n = detail::get_le<std::uint32_t>(bytes, pos);
  const auto m = detail::get_le<std::uint32_t>(bytes, pos);
  const double t = detail::get_le<double>(bytes, pos);
  GridSpec g(static_cast<int>(n), static_cast<int>(m));
  Snapshot s{VectorField(g), t};
  if (bytes.size() != pos + s.field.data.size() * sizeof(double)) throw IoError("snapshot: size does not match header");
  for (double& x : s.field.data) x = detail::get_le<double>(bytes, pos);
  return s;
}

inline void write_snapshot(const std::filesystem::path& path, const VectorField& f, double time) {
  detail::write_file(path, encode_snapshot(f, time));
}

inline void write_snapshot(const std::filesystem::path& path, const SpectralField& f, double time) {
  write_snapshot(path, dft_inverse(f), time);
}

inline Snapshot read_snapshot(const std::filesystem::path& path) { return decode_snapshot(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  double t = 0.0;
  Variant variant = Variant::v1_hamiltonian;
  int n = 2, m = 0, K = 0;
  double s = 0.0, eta = 0.0;
  std::vector<std::string> files;
  std::vector<std::uint64_t> noise_ids;
};

/// One snapshot per particle plus manifest.ini.
inline void write_checkpoint(const std::filesystem::path& dir, const Ensemble& ens) {
  std::filesystem::create_directories(dir);
  std::string manifest = "[checkpoint]\n";
  manifest += "seed = " + std::to_string(ens.stream.seed()) + "\n";
  manifest += "step = " + std::to_string(ens.step) + "\n";
  manifest += "t = " + format_double(ens.t) + "\n";
  manifest += "variant = " + to_string(ens.model.tag()) + "\n";
  manifest += "n = " + std::to_string(ens.grid().dim()) + "\n";
  manifest += "m = " + std::to_string(ens.grid().m()) + "\n";
  manifest += "K = " + std::to_string(ens.model.basis().cutoff()) + "\n";
  manifest += "s = " + format_double(ens.model.basis().sobolev()) + "\n";
  manifest += "eta = " + format_double(ens.model.eta()) + "\n";
  manifest += "particles = " + std::to_string(ens.size()) + "\n\n[files]\n";
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const auto name = fmt::format("particle_{:05d}.tmf", i);
    write_snapshot(dir / name, ens.particles[i], ens.t);
    manifest += fmt::format("{:05d} = {} {}\n", i, name, ens.noise_ids[i]);
  }
  detail::write_file(dir / "manifest.ini", manifest);
}

inline CheckpointInfo read_checkpoint_manifest(const std::filesystem::path& dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(detail::read_file(dir / "manifest.ini"));
  pt::read_ini(in, tree);
  CheckpointInfo info;
  info.seed = tree.get<std::uint64_t>("checkpoint.seed");
  info.step = tree.get<std::uint64_t>("checkpoint.step");
  info.t = tree.get<double>("checkpoint.t");
  info.variant = parse_variant(tree.get<std::string>("checkpoint.variant"));
  info.n = tree.get<int>("checkpoint.n");
  info.m = tree.get<int>("checkpoint.m");
  info.K = tree.get<int>("checkpoint.K");
  info.s = tree.get<double>("checkpoint.s");
  info.eta = tree.get<double>("checkpoint.eta");
  for (const auto& [key, v] : tree.get_child("files")) {
    std::istringstream row(v.data());
    std::string file;
    std::uint64_t id = 0;
    row >> file >> id;
    info.files.push_back(file);
    info.noise_ids.push_back(id);
  }
  return info;
}

/// Rebuilds the ensemble; coupling is supplied by the caller.
inline Ensemble read_checkpoint(const std::filesystem::path& dir, Coupling coupling) {
  const auto info = read_checkpoint_manifest(dir);
  std::vector<SpectralField> ps;
  for (const auto& f : info.files) ps.push_back(dft_forward(read_snapshot(dir / f).field));
  ModelVariant model(info.variant, info.eta, std::make_shared<BasisTruncation>(info.n, info.K, info.s));
  Ensemble ens(std::move(ps), model, NoiseStream(info.seed), coupling);
  ens.noise_ids = info.noise_ids;
  ens.step = info.step;
  ens.t = info.t;
  return ens;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Fixed-column CSV with 17-significant-digit floats; rows are flushed so a
/// failed run keeps everything written so far.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns)
      : out_(path, std::ios::trunc), columns_(std::move(columns)) {
    if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
    write_line(columns_);
  }

  using Cell = std::variant<double, std::int64_t, std::string>;

  void row(const std::vector<Cell>& cells) {
    if (cells.size() != columns_.size()) throw IoError("csv: row has the wrong number of cells");
    std::vector<std::string> text;
    text.reserve(cells.size());
    for (const auto& c : cells) {
      if (const auto* d = std::get_if<double>(&c)) {
        text.push_back(format_double(*d));
      } else if (const auto* i = std::get_if<std::int64_t>(&c)) {
        text.push_back(std::to_string(*i));
      } else {
        text.push_back(std::get<std::string>(c));
      }
    }
    write_line(text);
  }

  /// BLOWUP marker: first cell "BLOWUP", the time, then the message.
  void blowup(double t, const std::string& message) {
    std::string msg = message;
    for (char& ch : msg) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    out_ << "BLOWUP," << format_double(t) << "," << msg << "\n";
    out_.flush();
  }

  void comment(const std::string& text) {
    out_ << "#" << text << "\n";
    out_.flush();
  }

 private:
  void write_line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
    out_.flush();
  }

  std::ofstream out_;
  std::vector<std::string> columns_;
};

/// Per-alpha audit of the noise system, with a summary line for c_K, eps_K.
inline void write_basis_audit(const std::filesystem::path& path, const BasisTruncation& basis, const GridSpec& g) {
  CsvWriter csv(path, {"alpha", "a", "k", "i", "div_norm", "self_transport_norm"});
  const int n = basis.dim();
  for (std::size_t a = 0; a < basis.size(); ++a) {
    const auto X = basis.spectral_field(g, a);
    const double dn = spectral_divergence_norm(X);
    const double st = spectral_norm(spectral_transport(X, X, {true, false}));
    const auto& idx = basis[a];
    std::string k = "(";
    for (int d = 0; d < n; ++d) k += (d ? " " : "") + std::to_string(idx.k[d]);
    k += ")";
    const char* kind = idx.kind == BasisKind::constant ? "A0" : (idx.kind == BasisKind::cosine ? "A" : "B");
    csv.row({static_cast<std::int64_t>(a), std::string(kind), k, static_cast<std::int64_t>(idx.i), dn, st});
  }
  csv.comment("summary c_K=" + format_double(basis.effective_constant()) +
              " eps_K=" + format_double(basis.anisotropy()));
}

}  // namespace tmf
