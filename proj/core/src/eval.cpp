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

#include "ddafm/eval.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "ddafm/dataio.hpp"
#include "ddafm/parallel.hpp"
#include "ddafm/train.hpp"
#include "json.hpp"

namespace ddafm {

double to_db(double ratio) {
  if (!(ratio > 0.0)) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(ratio));
}

double nmse_ratio(const CTensor& gt, const CTensor& pred, Task task, const Mask& mask,
                  std::span<const std::uint8_t> validity) {
  if (gt.shape() != pred.shape() || gt.rank() != 4)
    throw std::invalid_argument("nmse: prediction " + shape_to_string(pred.shape()) + " does not match ground truth " +
                                shape_to_string(gt.shape()));
  const std::size_t na = gt.dim(0), nb = gt.dim(1), nrx = gt.dim(2) * gt.dim(3);
  if (!validity.empty() && validity.size() != na * nb) throw std::invalid_argument("nmse: validity size mismatch");
  const bool time_axis = mask.axis == MaskAxis::Time;
  double err = 0.0, ref = 0.0;
  std::size_t cells = 0;
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t b = 0; b < nb; ++b) {
      if (!validity.empty() && !validity[a * nb + b]) continue;
      if (task != Task::CE) {
        const std::size_t pos = time_axis ? a : b;
        if (pos >= mask.values.size() || mask.values[pos] != 0.0) continue;
      }
      ++cells;
      const cdouble* g = gt.raw() + (a * nb + b) * nrx;
      const cdouble* p = pred.raw() + (a * nb + b) * nrx;
      for (std::size_t r = 0; r < nrx; ++r) {
        err += std::norm(g[r] - p[r]);
        ref += std::norm(g[r]);
      }
    }
  }
  if (cells == 0) throw std::invalid_argument("nmse: the evaluation region is empty");
  if (!(ref > 0.0)) throw std::invalid_argument("nmse: ground truth has no energy in the evaluation region");
  return err / ref;
}

double nmse_eval(const CTensor& gt, const CTensor& pred, Task task, const Mask& mask,
                 std::span<const std::uint8_t> validity) {
  return to_db(nmse_ratio(gt, pred, task, mask, validity));
}

double rms_delay_spread(const PathSet& p) {
  if (p.paths.empty()) throw std::invalid_argument("rms_delay_spread: empty path set");
  double w = 0.0, m1 = 0.0, m2 = 0.0;
  for (const Path& path : p.paths) {
    const double pw = std::norm(path.beta);
    w += pw;
    m1 += pw * path.tau;
    m2 += pw * path.tau * path.tau;
  }
  if (!(w > 0.0)) return 0.0;
  m1 /= w;
  m2 /= w;
  return std::sqrt(std::max(0.0, m2 - m1 * m1));
}

const std::vector<std::string>& delay_spread_bin_labels() {
  static const std::vector<std::string> labels{"ultra-low", "low", "medium", "high", "ultra-high", "beyond"};
  return labels;
}

std::string_view delay_spread_bin(double seconds) {
  static constexpr double edges[] = {10e-9, 30e-9, 100e-9, 300e-9, 1000e-9};
  const auto& labels = delay_spread_bin_labels();
  for (std::size_t i = 0; i < 5; ++i)
    if (seconds < edges[i]) return labels[i];
  return labels[5];
}

const std::vector<std::string>& speed_bin_labels() {
  static const std::vector<std::string> labels{"0-20 km/h",  "20-40 km/h",  "40-60 km/h",
                                               "60-80 km/h", "80-100 km/h", "100-120 km/h"};
  return labels;
}

std::string speed_bin(double speed_mps) {
  const double kmh = speed_mps * 3.6;
  const auto idx = static_cast<std::size_t>(std::clamp(std::floor(kmh / 20.0), 0.0, 5.0));
  return speed_bin_labels()[idx];
}

std::string_view to_string(SensitivityKind k) {
  return k == SensitivityKind::RegionReduction ? "region_reduction" : "resolution_coarsening";
}

FrameStructure sensitivity_frame(const FrameStructure& fs, const SensitivityCase& c) {
  fs.validate();
  if (c.kappa < 1) throw std::invalid_argument("kappa must be >= 1");
  if (fs.n_t % c.kappa != 0 || fs.n_f % c.kappa != 0)
    throw std::invalid_argument("kappa " + std::to_string(c.kappa) + " does not divide N_t=" + std::to_string(fs.n_t) +
                                " and N_f=" + std::to_string(fs.n_f));
  FrameStructure out = fs;
  out.n_t /= c.kappa;
  out.n_f /= c.kappa;
  if (c.kind == SensitivityKind::RegionReduction) {
    out.dt *= static_cast<double>(c.kappa);
    out.df *= static_cast<double>(c.kappa);
  }
  return out;
}

CsiTensor baseline_ce_dft(const CsiTensor& h_obs, std::size_t d) {
  if (h_obs.domain != Domain::STF) throw std::invalid_argument("baseline_ce_dft expects STF-domain CSI");
  const FrameStructure& f = h_obs.frame;
  if (d < 1 || f.n_f % d != 0)
    throw std::invalid_argument("pilot spacing " + std::to_string(d) + " does not divide N_f=" + std::to_string(f.n_f));
  const std::size_t pilots = f.n_f / d;
  const std::size_t nrx = f.n_rx();
  // a_t = (1/P) sum_i H[iD] e^{+j2pi t i/P};  H[k] = sum_{t<P} a_t e^{-j2pi t k/N_f}
  std::vector<cdouble> fwd(pilots * pilots), back(f.n_f * pilots);
  for (std::size_t t = 0; t < pilots; ++t)
    for (std::size_t i = 0; i < pilots; ++i)
      fwd[t * pilots + i] =
          std::polar(1.0 / static_cast<double>(pilots),
                     2.0 * std::numbers::pi * static_cast<double>((t * i) % pilots) / static_cast<double>(pilots));
  for (std::size_t k = 0; k < f.n_f; ++k)
    for (std::size_t t = 0; t < pilots; ++t)
      back[k * pilots + t] =
          std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>((t * k) % f.n_f) / static_cast<double>(f.n_f));

  CsiTensor out(Domain::STF, f);
  std::vector<cdouble> taps(pilots);
  for (std::size_t s = 0; s < f.n_t; ++s) {
    for (std::size_t r = 0; r < nrx; ++r) {
      for (std::size_t t = 0; t < pilots; ++t) {
        cdouble acc{};
        for (std::size_t i = 0; i < pilots; ++i) acc += fwd[t * pilots + i] * h_obs.data[(s * f.n_f + i * d) * nrx + r];
        taps[t] = acc;
      }
      for (std::size_t k = 0; k < f.n_f; ++k) {
        cdouble acc{};
        for (std::size_t t = 0; t < pilots; ++t) acc += back[k * pilots + t] * taps[t];
        out.data[(s * f.n_f + k) * nrx + r] = acc;
      }
    }
  }
  return out;
}

CsiTensor baseline_interp_linear(const CsiTensor& h_obs, const Mask& mask) {
  const FrameStructure& f = h_obs.frame;
  const bool time_axis = mask.axis == MaskAxis::Time;
  const std::size_t n = time_axis ? f.n_t : f.n_f;
  if (mask.values.size() != n) throw std::invalid_argument("mask length does not match the masked axis");
  std::vector<std::size_t> seen;
  for (std::size_t i = 0; i < n; ++i)
    if (mask.values[i] != 0.0) seen.push_back(i);
  if (seen.size() < 2) throw std::invalid_argument("linear interpolation needs at least two observed entries");

  // For every axis position: the observed neighbours and the blend weight.
  struct Blend {
    std::size_t lo, hi;
    double w;
  };
  std::vector<Blend> plan(n);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (j + 1 < seen.size() && seen[j + 1] <= i) ++j;
    if (i <= seen.front()) {
      plan[i] = {seen.front(), seen.front(), 0.0};
    } else if (i >= seen.back()) {
      plan[i] = {seen.back(), seen.back(), 0.0};
    } else {
      const std::size_t lo = seen[j], hi = seen[j + 1];
      plan[i] = {lo, hi, static_cast<double>(i - lo) / static_cast<double>(hi - lo)};
    }
  }

  CsiTensor out(h_obs.domain, f);
  const std::size_t nrx = f.n_rx();
  auto index = [&](std::size_t s, std::size_t k, std::size_t r) { return (s * f.n_f + k) * nrx + r; };
  for (std::size_t s = 0; s < f.n_t; ++s) {
    for (std::size_t k = 0; k < f.n_f; ++k) {
      const Blend& b = plan[time_axis ? s : k];
      for (std::size_t r = 0; r < nrx; ++r) {
        const cdouble lo = time_axis ? h_obs.data[index(b.lo, k, r)] : h_obs.data[index(s, b.lo, r)];
        const cdouble hi = time_axis ? h_obs.data[index(b.hi, k, r)] : h_obs.data[index(s, b.hi, r)];
        out.data[index(s, k, r)] = b.w == 0.0 ? lo : (1.0 - b.w) * lo + b.w * hi;
      }
    }
  }
  return out;
}

// ---- reports -----------------------------------------------------------

namespace {

const std::vector<std::string> kTableOrder{"overall",
                                           "speed",
                                           "delay_spread",
                                           "snr",
                                           "kappa_region_reduction",
                                           "kappa_resolution_coarsening"};

template <typename V>
void push_unique(std::vector<V>& v, const V& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

}  // namespace

void EvalReport::add(const std::string& table, const std::string& task, const std::string& bin,
                     const std::string& method, double ratio) {
  push_unique(methods, method);
  push_unique(tasks, task);
  push_unique(bins[table], bin);
  cells[table][task][bin][method].add(ratio);
}

const EvalCell* EvalReport::find(const std::string& table, const std::string& task, const std::string& bin,
                                 const std::string& method) const {
  auto t = cells.find(table);
  if (t == cells.end()) return nullptr;
  auto k = t->second.find(task);
  if (k == t->second.end()) return nullptr;
  auto b = k->second.find(bin);
  if (b == k->second.end()) return nullptr;
  auto m = b->second.find(method);
  return m == b->second.end() ? nullptr : &m->second;
}

std::size_t EvalReport::table_count(const std::string& table, const std::string& task,
                                    const std::string& method) const {
  std::size_t n = 0;
  auto bit = bins.find(table);
  if (bit == bins.end()) return 0;
  for (const std::string& bin : bit->second)
    if (const EvalCell* c = find(table, task, bin, method)) n += c->count;
  return n;
}

void EvalReport::write_text(std::ostream& out) const {
  char buf[256];
  out << "records: " << records << "\n";
  for (const std::string& table : kTableOrder) {
    auto bit = bins.find(table);
    if (bit == bins.end()) continue;
    out << "\n== " << table << " (NMSE dB) ==\n";
    std::snprintf(buf, sizeof buf, "%-12s %-14s", "task", "bin");
    out << buf;
    for (const std::string& m : methods) {
      std::snprintf(buf, sizeof buf, " %14s", m.c_str());
      out << buf;
    }
    out << "      n\n";
    for (const std::string& task : tasks) {
      for (const std::string& bin : bit->second) {
        bool any = false;
        std::size_t n = 0;
        std::string row;
        for (const std::string& m : methods) {
          const EvalCell* c = find(table, task, bin, m);
          if (c) {
            any = true;
            n = std::max(n, c->count);
            std::snprintf(buf, sizeof buf, " %14.2f", c->db());
          } else {
            std::snprintf(buf, sizeof buf, " %14s", "-");
          }
          row += buf;
        }
        if (!any) continue;
        std::snprintf(buf, sizeof buf, "%-12s %-14s", task.c_str(), bin.c_str());
        out << buf << row;
        std::snprintf(buf, sizeof buf, " %6zu\n", n);
        out << buf;
      }
    }
  }
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["records"] = records;
  j["methods"] = methods;
  j["tasks"] = tasks;
  nlohmann::json cells_json = nlohmann::json::array();
  for (const std::string& table : kTableOrder) {
    auto bit = bins.find(table);
    if (bit == bins.end()) continue;
    for (const std::string& task : tasks)
      for (const std::string& bin : bit->second)
        for (const std::string& m : methods)
          if (const EvalCell* c = find(table, task, bin, m))
            cells_json.push_back({{"table", table},
                                  {"task", task},
                                  {"bin", bin},
                                  {"method", m},
                                  {"nmse_linear", c->mean()},
                                  {"nmse_db", c->db()},
                                  {"count", c->count}});
  }
  j["cells"] = std::move(cells_json);
  return j.dump(2);
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "table,task,bin,method,nmse_db,count\n";
  char buf[64];
  for (const std::string& table : kTableOrder) {
    auto bit = bins.find(table);
    if (bit == bins.end()) continue;
    for (const std::string& task : tasks)
      for (const std::string& bin : bit->second)
        for (const std::string& m : methods)
          if (const EvalCell* c = find(table, task, bin, m)) {
            std::snprintf(buf, sizeof buf, "%.6f", c->db());
            out << table << ',' << task << ',' << bin << ',' << m << ',' << buf << ',' << c->count << '\n';
          }
  }
}

std::string task_label(const MaskSpec& spec) {
  char buf[64];
  if (spec.task == Task::CE)
    std::snprintf(buf, sizeof buf, "CE D=%zu", spec.pilot_spacing);
  else
    std::snprintf(buf, sizeof buf, "%s x=%.2g", std::string(to_string(spec.task)).c_str(), spec.obs_ratio);
  return buf;
}

// ---- evaluation --------------------------------------------------------

namespace {

struct Entry {
  std::string table, task, bin, method;
  double ratio;
};

std::string snr_bin(double snr_db) {
  if (std::isinf(snr_db)) return "noiseless";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0f dB", std::round(snr_db));
  return buf;
}

// Scores every method on one (observation, ground truth) pair.
void score_sample(const Record& rec, const MaskSpec& spec, const Backbone* model, const ParamStore* params,
                  const EvalOptions& opt, const std::vector<std::pair<std::string, std::string>>& table_bins,
                  std::vector<Entry>& out) {
  try {
    spec.validate(rec.frame);
  } catch (const std::invalid_argument&) {
    return;  // the task does not apply to this frame (e.g. D does not divide N_f)
  }
  const Mask mask = build_mask(spec, rec.frame);
  const std::string label = task_label(spec);
  const CsiTensor obs(Domain::STF, rec.frame, rec.obs);
  const CsiTensor masked = apply_mask(obs, mask);

  std::vector<std::pair<std::string, CTensor>> preds;
  if (opt.run_model && model) {
    if (opt.pred_equals_gt) {
      preds.emplace_back("model", rec.gt);
    } else {
      const ModelConfig& cfg = model->config();
      PreparedSample s = prepare_sample(rec, spec, cfg.n_t_max, cfg.n_f_max);
      Tensor y = model->infer(*params, s.input, s.frame, s.validity);
      preds.emplace_back("model", decode_prediction(y.reshaped({y.dim(0) * y.dim(1), y.dim(2)}), s).data);
    }
  }
  if (opt.run_baselines) {
    try {
      preds.emplace_back("interp_linear",
                         opt.pred_equals_gt ? rec.gt : baseline_interp_linear(masked, mask).data);
    } catch (const std::invalid_argument&) {
    }
    if (spec.task == Task::CE)
      preds.emplace_back("ce_dft", opt.pred_equals_gt ? rec.gt : baseline_ce_dft(masked, spec.pilot_spacing).data);
  }
  for (const auto& [method, pred] : preds) {
    const double ratio = nmse_ratio(rec.gt, pred, spec.task, mask);
    for (const auto& [table, bin] : table_bins) out.push_back({table, label, bin, method, ratio});
  }
}

}  // namespace

EvalReport evaluate(std::span<const Record> records, const ModelConfig* cfg, const ParamStore* params,
                    const EvalOptions& opt) {
  if (opt.tasks.empty()) throw std::invalid_argument("evaluate: no tasks requested");
  std::optional<Backbone> model;
  if (opt.run_model) {
    if (!cfg || !params) throw std::invalid_argument("evaluate: model requested without a checkpoint");
    model.emplace(*cfg);
    for (const Record& r : records)
      if (r.frame.n_t > cfg->n_t_max || r.frame.n_f > cfg->n_f_max || 2 * r.frame.n_rx() != cfg->in_channels)
        throw std::invalid_argument("evaluate: record frame " + std::to_string(r.frame.n_t) + "x" +
                                    std::to_string(r.frame.n_f) + " with " + std::to_string(r.frame.n_rx()) +
                                    " antennas does not fit the model grid");
  }
  const Backbone* net = model ? &*model : nullptr;

  std::vector<std::vector<Entry>> per_record(records.size());
  parallel_for(records.size(), opt.threads, [&](std::size_t i) {
    const Record& rec = records[i];
    std::vector<Entry>& out = per_record[i];
    const std::vector<std::pair<std::string, std::string>> bins{
        {"overall", "all"},
        {"speed", speed_bin(rec.speed_mps)},
        {"delay_spread", std::string(delay_spread_bin(rec.rms_delay_spread_s))},
        {"snr", snr_bin(rec.snr_db)}};
    for (const MaskSpec& spec : opt.tasks) score_sample(rec, spec, net, params, opt, bins, out);

    if (!opt.kappa_sweep) return;
    for (SensitivityKind kind : {SensitivityKind::RegionReduction, SensitivityKind::ResolutionCoarsening}) {
      for (std::size_t kappa : opt.kappas) {
        FrameStructure frame;
        try {
          frame = sensitivity_frame(rec.frame, {kappa, kind});
        } catch (const std::invalid_argument&) {
          continue;
        }
        Record alt;
        alt.frame = frame;
        alt.seed = rec.seed;
        alt.snr_db = rec.snr_db;
        alt.speed_mps = rec.speed_mps;
        alt.heading_rad = rec.heading_rad;
        alt.rms_delay_spread_s = rec.rms_delay_spread_s;
        alt.paths = rec.paths;
        Rng rng(derive_seed(opt.seed, {i, kappa, kind == SensitivityKind::RegionReduction ? 1u : 2u}));
        CsiTensor gt = normalize_energy(synth_stf(rec.paths, frame));
        alt.obs = add_noise(gt, rec.snr_db, rng).data;
        alt.gt = std::move(gt.data);
        const std::string table = "kappa_" + std::string(to_string(kind));
        const std::vector<std::pair<std::string, std::string>> kb{{table, "k=" + std::to_string(kappa)}};
        for (const MaskSpec& spec : opt.tasks) score_sample(alt, spec, net, params, opt, kb, out);
      }
    }
  });

  EvalReport report;
  report.records = records.size();
  // Fixed column and row order independent of which cells happen to appear first.
  for (const char* m : {"model", "interp_linear", "ce_dft"}) {
    const bool wanted = std::string(m) == "model" ? opt.run_model : opt.run_baselines;
    if (wanted) report.methods.push_back(m);
  }
  for (const MaskSpec& spec : opt.tasks) push_unique(report.tasks, task_label(spec));
  report.bins["overall"] = {"all"};
  report.bins["speed"] = speed_bin_labels();
  report.bins["delay_spread"] = delay_spread_bin_labels();
  for (const auto& entries : per_record)
    for (const Entry& e : entries) report.add(e.table, e.task, e.bin, e.method, e.ratio);
  return report;
}

}  // namespace ddafm
