// SPDX-License-Identifier: Apache-2.0
//
// ddafm: delay-Doppler-angle channel reconstruction toolkit
// Copyright (C) 2026 The ddafm authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "ddafm/dataio.hpp"

#include <openssl/evp.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "ddafm/config.hpp"
#include "ddafm/eval.hpp"
#include "ddafm/parallel.hpp"

namespace ddafm {

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw DataError("bad number '" + s + "' in header");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw DataError("bad integer '" + s + "' in header");
  return v;
}

template <typename U>
void put_le(std::string& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const char* p) {
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return bits;
}

void put_f32(std::string& out, double v) { put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
double get_f32(const char* p) { return std::bit_cast<float>(get_le<std::uint32_t>(p)); }
double get_f64(const char* p) { return std::bit_cast<double>(get_le<std::uint64_t>(p)); }

void append_complex_f32(std::string& out, const CTensor& t) {
  for (const cdouble& z : t.data()) {
    put_f32(out, z.real());
    put_f32(out, z.imag());
  }
}

std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> words;
  std::istringstream is(line);
  for (std::string w; is >> w;) words.push_back(w);
  return words;
}

// Reads "key value" pairs from a word list starting at `pos`.
class WordCursor {
 public:
  WordCursor(const std::vector<std::string>& w, std::size_t pos) : w_(w), pos_(pos) {}
  const std::string& value(std::string_view key) {
    if (pos_ + 1 >= w_.size() || w_[pos_] != key) throw DataError("expected '" + std::string(key) + "' in header");
    pos_ += 2;
    return w_[pos_ - 1];
  }
  const std::string& next() {
    if (pos_ >= w_.size()) throw DataError("truncated header line");
    return w_[pos_++];
  }
  bool done() const { return pos_ == w_.size(); }

 private:
  const std::vector<std::string>& w_;
  std::size_t pos_;
};

std::string read_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("unexpected end of header");
  return line;
}

std::string expect_field(std::istream& in, std::string_view key) {
  std::string line = read_line(in);
  if (line.compare(0, key.size() + 1, std::string(key) + " ") != 0)
    throw DataError("expected header field '" + std::string(key) + "', got '" + line.substr(0, 40) + "'");
  return line.substr(key.size() + 1);
}

std::string read_exact(std::istream& in, std::size_t n, const char* what) {
  std::string buf(n, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw DataError(std::string("truncated ") + what + ": expected " + std::to_string(n) + " bytes, got " +
                    std::to_string(in.gcount()));
  return buf;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> counters) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (std::uint64_t c : counters) h = mix(h ^ mix(c + 0x632be59bd9b4e019ULL));
  return h;
}

// ---- datasets ----------------------------------------------------------

std::size_t record_payload_bytes(const FrameStructure& frame) { return 2 * 2 * frame.volume() * sizeof(float); }

void write_dataset(const Dataset& ds, std::ostream& out) {
  std::string payload;
  std::size_t total = 0;
  for (const Record& r : ds.records) total += record_payload_bytes(r.frame);
  payload.reserve(total);
  for (const Record& r : ds.records) {
    if (r.obs.shape() != r.frame.tensor_shape() || r.gt.shape() != r.frame.tensor_shape())
      throw std::invalid_argument("record tensors do not match their frame structure");
    append_complex_f32(payload, r.obs);
    append_complex_f32(payload, r.gt);
  }
  const std::string scenario = to_json(ds.scenario);

  std::ostringstream h;
  h << "DDAFM-DATASET " << kDatasetVersion << "\n";
  h << "count " << ds.records.size() << "\n";
  h << "scenario " << scenario << "\n";
  h << "scenario_sha256 " << sha256_hex(scenario) << "\n";
  h << "payload_bytes " << payload.size() << "\n";
  h << "payload_sha256 " << sha256_hex(payload) << "\n";
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const Record& r = ds.records[i];
    const FrameStructure& f = r.frame;
    h << "record " << i << " seed " << r.seed << " n_t " << f.n_t << " dt " << fmt(f.dt) << " n_f " << f.n_f << " df "
      << fmt(f.df) << " n_rx1 " << f.n_rx1 << " n_rx2 " << f.n_rx2 << " snr_db " << fmt(r.snr_db) << " speed_mps "
      << fmt(r.speed_mps) << " heading_rad " << fmt(r.heading_rad) << " rms_delay_spread_s "
      << fmt(r.rms_delay_spread_s) << " paths " << r.paths.paths.size();
    for (const Path& p : r.paths.paths)
      h << ' ' << fmt(p.beta.real()) << ' ' << fmt(p.beta.imag()) << ' ' << fmt(p.nu) << ' ' << fmt(p.tau) << ' '
        << fmt(p.theta) << ' ' << fmt(p.phi);
    h << "\n";
  }
  h << "end-header\n";
  const std::string header = h.str();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("failed writing dataset");
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create " + path.string());
  write_dataset(ds, out);
}

Dataset read_dataset(std::istream& in) {
  const std::string magic = read_line(in);
  const std::string prefix = "DDAFM-DATASET ";
  if (magic.compare(0, prefix.size(), prefix) != 0) throw DataError("not a dataset file");
  const auto version = parse_u64(magic.substr(prefix.size()));
  if (version != static_cast<std::uint64_t>(kDatasetVersion))
    throw DataError("dataset version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kDatasetVersion) + ")");
  Dataset ds;
  const std::size_t count = parse_u64(expect_field(in, "count"));
  const std::string scenario = expect_field(in, "scenario");
  if (expect_field(in, "scenario_sha256") != sha256_hex(scenario)) throw DataError("scenario digest mismatch");
  try {
    merge_json(ds.scenario, scenario);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("bad scenario block: ") + e.what());
  }
  const std::size_t payload_bytes = parse_u64(expect_field(in, "payload_bytes"));
  const std::string digest = expect_field(in, "payload_sha256");

  std::size_t expected = 0;
  ds.records.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto words = split_words(read_line(in));
    WordCursor c(words, 0);
    if (c.value("record") != std::to_string(i)) throw DataError("record index out of order");
    Record& r = ds.records[i];
    r.seed = parse_u64(c.value("seed"));
    r.frame.n_t = parse_u64(c.value("n_t"));
    r.frame.dt = parse_double(c.value("dt"));
    r.frame.n_f = parse_u64(c.value("n_f"));
    r.frame.df = parse_double(c.value("df"));
    r.frame.n_rx1 = parse_u64(c.value("n_rx1"));
    r.frame.n_rx2 = parse_u64(c.value("n_rx2"));
    try {
      r.frame.validate();
    } catch (const std::invalid_argument& e) {
      throw DataError("record " + std::to_string(i) + ": " + e.what());
    }
    r.snr_db = parse_double(c.value("snr_db"));
    r.speed_mps = parse_double(c.value("speed_mps"));
    r.heading_rad = parse_double(c.value("heading_rad"));
    r.rms_delay_spread_s = parse_double(c.value("rms_delay_spread_s"));
    const std::size_t np = parse_u64(c.value("paths"));
    r.paths.paths.resize(np);
    for (Path& p : r.paths.paths) {
      const double re = parse_double(c.next());
      const double im = parse_double(c.next());
      p.beta = {re, im};
      p.nu = parse_double(c.next());
      p.tau = parse_double(c.next());
      p.theta = parse_double(c.next());
      p.phi = parse_double(c.next());
    }
    if (!c.done()) throw DataError("trailing fields on record " + std::to_string(i));
    expected += record_payload_bytes(r.frame);
  }
  if (read_line(in) != "end-header") throw DataError("missing end-header marker");
  if (payload_bytes != expected)
    throw DataError("payload_bytes " + std::to_string(payload_bytes) + " disagrees with the record list (" +
                    std::to_string(expected) + ")");
  const std::string payload = read_exact(in, payload_bytes, "payload");
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes after payload");
  if (sha256_hex(payload) != digest) throw DataError("payload digest mismatch (file corrupted)");

  const char* p = payload.data();
  for (Record& r : ds.records) {
    for (CTensor* t : {&r.obs, &r.gt}) {
      *t = CTensor(r.frame.tensor_shape());
      for (cdouble& z : t->data()) {
        z = {get_f32(p), get_f32(p + 4)};
        p += 8;
      }
    }
  }
  return ds;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_dataset(in);
}

Dataset generate_dataset(const GenerateOptions& opt) {
  opt.scenario.validate();
  if (opt.count < 1) throw std::invalid_argument("count must be >= 1");
  if (opt.frames.empty()) throw std::invalid_argument("at least one frame structure is required");
  for (const FrameStructure& f : opt.frames) f.validate();
  if (!opt.fixed_snr_db && !(opt.snr_min_db <= opt.snr_max_db))
    throw std::invalid_argument("snr_min_db must not exceed snr_max_db");

  Dataset ds;
  ds.scenario = opt.scenario;
  ds.records.resize(opt.count);
  parallel_for(opt.count, opt.threads, [&](std::size_t i) {
    Record& r = ds.records[i];
    r.seed = derive_seed(opt.seed, {i});
    r.frame = opt.frames[i % opt.frames.size()];
    Rng rng(r.seed);
    PathDraw draw = sample_path_draw(opt.scenario, rng);
    r.paths = std::move(draw.paths);
    r.speed_mps = draw.speed_mps;
    r.heading_rad = draw.heading_rad;
    r.rms_delay_spread_s = rms_delay_spread(r.paths);
    if (opt.fixed_snr_db) {
      r.snr_db = *opt.fixed_snr_db;
    } else {
      std::uniform_real_distribution<double> snr(opt.snr_min_db, opt.snr_max_db);
      r.snr_db = snr(rng);
    }
    CsiTensor gt = normalize_energy(synth_stf(r.paths, r.frame));
    CsiTensor obs = add_noise(gt, r.snr_db, rng);
    r.gt = std::move(gt.data);
    r.obs = std::move(obs.data);
  });
  return ds;
}

// ---- checkpoints -------------------------------------------------------

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const ParamStore& ps = ck.params;
  const bool has_adam = !ck.adam.m.empty();
  if (has_adam && (ck.adam.m.size() != ps.size() || ck.adam.v.size() != ps.size()))
    throw std::invalid_argument("optimizer state does not match the parameter list");

  std::string payload;
  payload.reserve(ps.scalar_count() * 8 * (has_adam ? 3 : 1));
  auto put_all = [&](const std::vector<Tensor>& ts) {
    for (const Tensor& t : ts)
      for (double v : t.data()) put_f64(payload, v);
  };
  put_all(ps.tensors());
  if (has_adam) {
    put_all(ck.adam.m);
    put_all(ck.adam.v);
  }

  std::ostringstream h;
  h << "DDAFM-CHECKPOINT " << kCheckpointVersion << "\n";
  h << "model " << to_json(ck.model) << "\n";
  h << "seed " << ck.seed << "\n";
  h << "cursor " << ck.cursor.stage << ' ' << ck.cursor.epoch << ' ' << ck.cursor.batch << ' '
    << ck.cursor.stage_step << ' ' << ck.cursor.global_step << ' ' << (ck.cursor.finished ? 1 : 0) << "\n";
  h << "adam " << (has_adam ? 1 : 0) << ' ' << ck.adam.t << ' ' << fmt(ck.adam.beta1) << ' ' << fmt(ck.adam.beta2)
    << ' ' << fmt(ck.adam.eps) << "\n";
  h << "tensors " << ps.size() << "\n";
  for (std::size_t i = 0; i < ps.size(); ++i) {
    h << ps.names()[i] << ' ' << ps.tensors()[i].rank();
    for (std::size_t d : ps.tensors()[i].shape()) h << ' ' << d;
    h << "\n";
  }
  h << "payload_bytes " << payload.size() << "\n";
  h << "payload_sha256 " << sha256_hex(payload) << "\n";
  h << "end-header\n";

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot create " + tmp.string());
    const std::string header = h.str();
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw DataError("failed writing checkpoint");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string magic = read_line(in);
  const std::string prefix = "DDAFM-CHECKPOINT ";
  if (magic.compare(0, prefix.size(), prefix) != 0) throw DataError("not a checkpoint file");
  if (parse_u64(magic.substr(prefix.size())) != static_cast<std::uint64_t>(kCheckpointVersion))
    throw DataError("unsupported checkpoint version");

  Checkpoint ck;
  try {
    merge_json(ck.model, expect_field(in, "model"));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("bad model block: ") + e.what());
  }
  ck.seed = parse_u64(expect_field(in, "seed"));
  {
    const auto w = split_words(expect_field(in, "cursor"));
    if (w.size() != 6) throw DataError("bad cursor line");
    ck.cursor = {parse_u64(w[0]), parse_u64(w[1]), parse_u64(w[2]), parse_u64(w[3]), parse_u64(w[4]), w[5] == "1"};
  }
  bool has_adam = false;
  {
    const auto w = split_words(expect_field(in, "adam"));
    if (w.size() != 5) throw DataError("bad adam line");
    has_adam = w[0] == "1";
    ck.adam.t = parse_u64(w[1]);
    ck.adam.beta1 = parse_double(w[2]);
    ck.adam.beta2 = parse_double(w[3]);
    ck.adam.eps = parse_double(w[4]);
  }
  const std::size_t n = parse_u64(expect_field(in, "tensors"));
  const auto layout = parameter_layout(ck.model);
  if (layout.size() != n) throw DataError("checkpoint tensor count does not match its model config");
  std::vector<Shape> shapes;
  std::size_t scalars = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = split_words(read_line(in));
    if (w.size() < 2) throw DataError("bad tensor directory line");
    const std::size_t rank = parse_u64(w[1]);
    if (w.size() != 2 + rank) throw DataError("bad tensor directory line");
    Shape shape;
    for (std::size_t d = 0; d < rank; ++d) shape.push_back(parse_u64(w[2 + d]));
    if (w[0] != layout[i].first || shape != layout[i].second)
      throw DataError("tensor '" + w[0] + "' does not match the canonical layout");
    scalars += shape_numel(shape);
    shapes.push_back(std::move(shape));
  }
  const std::size_t bytes = parse_u64(expect_field(in, "payload_bytes"));
  const std::string digest = expect_field(in, "payload_sha256");
  if (read_line(in) != "end-header") throw DataError("missing end-header marker");
  if (bytes != scalars * 8 * (has_adam ? 3 : 1)) throw DataError("checkpoint payload size mismatch");
  const std::string payload = read_exact(in, bytes, "checkpoint payload");
  if (sha256_hex(payload) != digest) throw DataError("checkpoint digest mismatch (file corrupted)");

  const char* p = payload.data();
  auto take = [&](const Shape& shape) {
    Tensor t(shape);
    for (double& v : t.data()) {
      v = get_f64(p);
      p += 8;
    }
    return t;
  };
  for (std::size_t i = 0; i < n; ++i) ck.params.add(layout[i].first, take(shapes[i]));
  if (has_adam) {
    for (std::size_t i = 0; i < n; ++i) ck.adam.m.push_back(take(shapes[i]));
    for (std::size_t i = 0; i < n; ++i) ck.adam.v.push_back(take(shapes[i]));
  }
  return ck;
}

}  // namespace ddafm
