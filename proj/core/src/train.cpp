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

#include "ddafm/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "ddafm/eval.hpp"
#include "ddafm/parallel.hpp"
#include "ddafm/transform.hpp"
#include "json.hpp"

namespace ddafm {

// ---- plans -------------------------------------------------------------

void TrainPlan::validate() const {
  auto fail = [](const char* field, const char* why) {
    throw std::invalid_argument(std::string("field '") + field + "': " + why);
  };
  if (!(data_fraction > 0.0 && data_fraction <= 1.0)) fail("data_fraction", "must lie in (0, 1]");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (!(initial_lr > 0.0)) fail("initial_lr", "must be positive");
  if (!(min_lr > 0.0 && min_lr <= initial_lr)) fail("min_lr", "must lie in (0, initial_lr]");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) fail("decay_factor", "must lie in (0, 1]");
  if (decay_interval_steps < 1) fail("decay_interval_steps", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(obs_ratio_min > 0.0 && obs_ratio_min <= 1.0)) fail("obs_ratio_min", "must lie in (0, 1]");
  if (!(obs_ratio_max >= obs_ratio_min && obs_ratio_max <= 1.0)) fail("obs_ratio_max", "must lie in [obs_ratio_min, 1]");
  if (pilot_spacings.empty()) fail("pilot_spacings", "must not be empty");
  for (std::size_t d : pilot_spacings)
    if (d < 1) fail("pilot_spacings", "entries must be >= 1");
}

TrainPlan TrainPlan::full_stage1() {
  TrainPlan p;
  p.data_fraction = 0.5;
  p.epochs = 1;
  p.initial_lr = 6e-5;
  p.min_lr = 3e-5;
  p.decay_factor = 0.8;
  p.decay_interval_steps = 400;
  p.batch_size = 176;
  p.obs_ratio_min = p.obs_ratio_max = 0.75;
  p.pilot_spacings = {2};
  return p;
}

TrainPlan TrainPlan::full_stage2() {
  TrainPlan p;
  p.data_fraction = 1.0;
  p.epochs = 1;
  p.initial_lr = 3e-5;
  p.min_lr = 5e-6;
  p.decay_factor = 0.9;
  p.decay_interval_steps = 5000;
  p.batch_size = 176;
  p.obs_ratio_min = 0.5;
  p.obs_ratio_max = 0.75;
  p.pilot_spacings = {2, 4};
  return p;
}

void Curriculum::validate() const {
  auto stage = [](const TrainPlan& p, const char* name) {
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(name) + "." + e.what());
    }
  };
  stage(stage1, "stage1");
  stage(stage2, "stage2");
  if (std::isnan(clip_norm)) throw std::invalid_argument("field 'clip_norm': must be a number");
}

Curriculum Curriculum::full() { return Curriculum{}; }

Curriculum Curriculum::desk() {
  Curriculum c;
  c.stage1.data_fraction = 0.5;
  c.stage1.epochs = 1;
  c.stage1.initial_lr = 2e-3;
  c.stage1.min_lr = 1e-3;
  c.stage1.decay_factor = 0.8;
  c.stage1.decay_interval_steps = 40;
  c.stage1.batch_size = 8;
  c.stage2.data_fraction = 1.0;
  c.stage2.epochs = 4;
  c.stage2.initial_lr = 1e-3;
  c.stage2.min_lr = 1e-4;
  c.stage2.decay_factor = 0.9;
  c.stage2.decay_interval_steps = 100;
  c.stage2.batch_size = 8;
  return c;
}

double lr_at(std::size_t step, const TrainPlan& plan) {
  const double decays = static_cast<double>(step / plan.decay_interval_steps);
  return std::max(plan.min_lr, plan.initial_lr * std::pow(plan.decay_factor, decays));
}

// ---- loss --------------------------------------------------------------

double nmse_loss(const CTensor& gt, const CTensor& pred, std::span<const std::uint8_t> validity) {
  if (gt.shape() != pred.shape() || gt.rank() < 2)
    throw std::invalid_argument("nmse_loss: shapes " + shape_to_string(gt.shape()) + " and " +
                                shape_to_string(pred.shape()) + " differ");
  const std::size_t cells = gt.dim(0) * gt.dim(1);
  const std::size_t inner = gt.size() / cells;
  if (!validity.empty() && validity.size() != cells) throw std::invalid_argument("nmse_loss: validity size mismatch");
  double err = 0.0, ref = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    if (!validity.empty() && !validity[c]) continue;
    for (std::size_t r = 0; r < inner; ++r) {
      const std::size_t i = c * inner + r;
      err += std::norm(gt[i] - pred[i]);
      ref += std::norm(gt[i]);
    }
  }
  if (!(ref > 0.0)) throw std::domain_error("nmse_loss: ground truth has zero energy");
  return err / ref;
}

// ---- batches -----------------------------------------------------------

namespace {

MaskSpec draw_for_task(Task task, const TrainPlan& plan, Rng& rng) {
  if (task == Task::CE) {
    std::uniform_int_distribution<std::size_t> pick(0, plan.pilot_spacings.size() - 1);
    return MaskSpec::channel_estimation(plan.pilot_spacings[pick(rng)]);
  }
  double x = plan.obs_ratio_min;
  if (plan.obs_ratio_max > plan.obs_ratio_min) {
    std::uniform_real_distribution<double> u(plan.obs_ratio_min, plan.obs_ratio_max);
    x = u(rng);
  }
  return task == Task::TP ? MaskSpec::time_prediction(x) : MaskSpec::frequency_prediction(x);
}

}  // namespace

MaskSpec draw_mask(const TrainPlan& plan, Rng& rng) {
  std::uniform_int_distribution<int> task(0, 2);
  return draw_for_task(static_cast<Task>(task(rng)), plan, rng);
}

BatchSpec build_batch(std::span<const Record> pool, std::span<const std::size_t> indices, const TrainPlan& plan,
                      Rng& rng, std::size_t rows, std::size_t cols) {
  BatchSpec b;
  b.rows = rows;
  b.cols = cols;
  for (std::size_t idx : indices) {
    if (idx >= pool.size()) throw std::out_of_range("batch index outside the pool");
    const FrameStructure& f = pool[idx].frame;
    if (f.n_t > rows || f.n_f > cols)
      throw std::invalid_argument("frame " + std::to_string(f.n_t) + "x" + std::to_string(f.n_f) +
                                  " does not fit the padded grid " + std::to_string(rows) + "x" + std::to_string(cols));
    MaskSpec spec = draw_mask(plan, rng);
    spec.validate(f);
    b.indices.push_back(idx);
    b.masks.push_back(spec);
    b.frames.push_back(f);
  }
  return b;
}

PreparedSample prepare_sample(const Record& rec, const MaskSpec& spec, std::size_t rows, std::size_t cols) {
  PreparedSample s;
  s.frame = rec.frame;
  s.spec = spec;
  s.mask = build_mask(spec, rec.frame);
  const CsiTensor obs(Domain::STF, rec.frame, rec.obs);
  const PaddedSample padded = pad_and_mark(stf_to_dda(apply_mask(obs, s.mask)), rows, cols);
  s.scale = std::sqrt(static_cast<double>(rec.frame.volume()));
  s.input = realify(padded.data);
  for (double& v : s.input.data()) v *= s.scale;
  s.validity = padded.validity;
  return s;
}

CsiTensor decode_prediction(const Tensor& output, const PreparedSample& s) {
  const FrameStructure& f = s.frame;
  const std::size_t ch = 2 * f.n_rx();
  const std::size_t cells = s.validity.size();
  if (output.size() != cells * ch) throw std::invalid_argument("decode_prediction: output size does not match grid");
  const std::size_t cols = s.input.dim(1);
  Tensor block({f.n_t, f.n_f, ch});
  const double inv = 1.0 / s.scale;
  for (std::size_t a = 0; a < f.n_t; ++a)
    for (std::size_t b = 0; b < f.n_f; ++b) {
      const double* src = output.raw() + (a * cols + b) * ch;
      double* dst = block.raw() + (a * f.n_f + b) * ch;
      for (std::size_t c = 0; c < ch; ++c) dst[c] = src[c] * inv;
    }
  return dda_to_stf(complexify(block, f));
}

ad::Var nmse_loss_node(ad::Var output, const PreparedSample& s, const CTensor& gt) {
  const FrameStructure f = s.frame;
  if (gt.shape() != f.tensor_shape()) throw std::invalid_argument("nmse_loss_node: ground truth shape mismatch");
  const CsiTensor pred = decode_prediction(output.value(), s);
  auto residual = std::make_shared<CsiTensor>(Domain::STF, f);
  double ref = 0.0, err = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    residual->data[i] = gt[i] - pred.data[i];
    err += std::norm(residual->data[i]);
    ref += std::norm(gt[i]);
  }
  if (!(ref > 0.0)) throw std::domain_error("nmse_loss: ground truth has zero energy");
  const double coef = -2.0 / (ref * s.scale);
  const std::size_t cols = s.input.dim(1);
  return output.graph->record(
      Tensor({1}, err / ref), {output},
      [residual, coef, f, cols](const Tensor&, const Tensor& grad_out, std::span<Tensor* const> grads) {
        if (!grads[0]) return;
        // d/dy ||g - T^-1 y||^2 = -2 T(g - T^-1 y) for the unitary T.
        const Tensor g = realify(stf_to_dda(*residual).data);
        const std::size_t ch = g.dim(2);
        const double k = coef * grad_out[0];
        for (std::size_t a = 0; a < f.n_t; ++a)
          for (std::size_t b = 0; b < f.n_f; ++b) {
            const double* src = g.raw() + (a * f.n_f + b) * ch;
            double* dst = grads[0]->raw() + (a * cols + b) * ch;
            for (std::size_t c = 0; c < ch; ++c) dst[c] += k * src[c];
          }
      });
}

SampleGradient sample_gradient(const Backbone& model, const ParamStore& params, const PreparedSample& s,
                               const CTensor& gt) {
  ad::Graph graph;
  BoundParams bound(graph, params, true);
  ad::Var out = model.forward(graph, bound, s.input, s.frame, s.validity);
  ad::Var loss = nmse_loss_node(out, s, gt);
  graph.backward(loss);
  SampleGradient r;
  r.loss = loss.value()[0];
  r.grads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor* g = graph.grad(bound.vars()[i]);
    r.grads.push_back(g ? *g : Tensor(params.tensors()[i].shape(), 0.0));
  }
  return r;
}

// ---- optimizer ---------------------------------------------------------

AdamState make_adam_state(const ParamStore& params) {
  AdamState s;
  for (const Tensor& t : params.tensors()) {
    s.m.emplace_back(t.shape(), 0.0);
    s.v.emplace_back(t.shape(), 0.0);
  }
  return s;
}

void adam_step(ParamStore& params, std::span<const Tensor> grads, AdamState& st, double lr) {
  if (grads.size() != params.size() || st.m.size() != params.size() || st.v.size() != params.size())
    throw std::invalid_argument("adam_step: gradient/state count does not match the parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params.tensors()[i].shape())
      throw std::invalid_argument("adam_step: gradient shape mismatch for '" + params.names()[i] + "'");
    for (double g : grads[i].data())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in '" + params.names()[i] + "'");
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    double* p = params.tensors()[i].raw();
    double* m = st.m[i].raw();
    double* v = st.v[i].raw();
    const double* g = grads[i].raw();
    for (std::size_t k = 0; k < grads[i].size(); ++k) {
      m[k] = st.beta1 * m[k] + (1.0 - st.beta1) * g[k];
      v[k] = st.beta2 * v[k] + (1.0 - st.beta2) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + st.eps);
    }
  }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double k = max_norm / norm;
    for (Tensor& g : grads)
      for (double& v : g.data()) v *= k;
  }
  return norm;
}

// ---- curriculum --------------------------------------------------------

std::vector<MaskSpec> validation_masks(const Curriculum& plan, std::span<const Record> val) {
  std::vector<MaskSpec> masks;
  masks.reserve(val.size());
  for (std::size_t j = 0; j < val.size(); ++j) {
    Rng rng(derive_seed(plan.seed, {0x7a11, j}));
    MaskSpec spec = draw_for_task(static_cast<Task>(j % 3), plan.stage2, rng);
    if (spec.task == Task::CE && val[j].frame.n_f % spec.pilot_spacing != 0) spec.pilot_spacing = 1;
    masks.push_back(spec);
  }
  return masks;
}

ValidationMetrics validate_model(const Backbone& model, const ParamStore& params, std::span<const Record> val,
                                 std::span<const MaskSpec> masks, unsigned threads) {
  if (masks.size() != val.size()) throw std::invalid_argument("validate_model: one mask per record is required");
  const ModelConfig& cfg = model.config();
  std::vector<double> losses(val.size());
  parallel_for(val.size(), threads, [&](std::size_t j) {
    PreparedSample s = prepare_sample(val[j], masks[j], cfg.n_t_max, cfg.n_f_max);
    Tensor y = model.infer(params, s.input, s.frame, s.validity);
    losses[j] = nmse_loss(val[j].gt, decode_prediction(y.reshaped({y.dim(0) * y.dim(1), y.dim(2)}), s).data);
  });
  ValidationMetrics m;
  for (std::size_t j = 0; j < val.size(); ++j) {
    m.loss += losses[j];
    const auto t = static_cast<std::size_t>(masks[j].task);
    m.task_nmse[t] += losses[j];
    ++m.task_count[t];
  }
  if (!val.empty()) m.loss /= static_cast<double>(val.size());
  for (std::size_t t = 0; t < 3; ++t)
    if (m.task_count[t]) m.task_nmse[t] /= static_cast<double>(m.task_count[t]);
  return m;
}

namespace {

nlohmann::json task_json(const std::array<double, 3>& nmse, const std::array<std::size_t, 3>& count) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t t = 0; t < 3; ++t) {
    const std::string key(to_string(static_cast<Task>(t)));
    j[key] = count[t] ? nlohmann::json(to_db(nmse[t])) : nlohmann::json(nullptr);
  }
  return j;
}

void emit(std::ostream* out, const StepMetrics& m) {
  if (!out) return;
  nlohmann::json j = {{"type", "step"},   {"stage", m.stage + 1}, {"epoch", m.epoch},
                      {"step", m.step},   {"lr", m.lr},           {"loss", m.loss},
                      {"grad_norm", m.grad_norm}, {"nmse_db", task_json(m.task_nmse, m.task_count)}};
  *out << j.dump() << '\n';
  out->flush();
}

void emit(std::ostream* out, const ValidationMetrics& m) {
  if (!out) return;
  nlohmann::json j = {{"type", "validation"}, {"stage", m.stage + 1},
                      {"epoch", m.epoch},     {"step", m.step},
                      {"loss", m.loss},       {"loss_db", to_db(m.loss)},
                      {"nmse_db", task_json(m.task_nmse, m.task_count)}};
  *out << j.dump() << '\n';
  out->flush();
}

std::vector<std::size_t> stage_pool(const Curriculum& plan, std::size_t n, double fraction) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(plan.seed, {0x5eed}));
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  perm.resize(std::min(n, take));
  return perm;
}

}  // namespace

TrainResult run_curriculum(const Curriculum& plan, const ModelConfig& cfg, std::span<const Record> train,
                           std::span<const Record> val, const TrainOptions& opt,
                           const std::optional<Checkpoint>& resume) {
  plan.validate();
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("training pool is empty");
  for (const Record& r : train)
    if (2 * r.frame.n_rx() != cfg.in_channels || r.frame.n_t > cfg.n_t_max || r.frame.n_f > cfg.n_f_max)
      throw std::invalid_argument("a training record does not fit the model grid or input channels");

  TrainResult res;
  if (resume) {
    if (!(resume->model == cfg)) throw std::invalid_argument("checkpoint model config differs from the requested one");
    if (resume->seed != plan.seed) throw std::invalid_argument("checkpoint seed differs from the curriculum seed");
    res.params = resume->params;
    res.adam = resume->adam.m.empty() ? make_adam_state(res.params) : resume->adam;
    res.cursor = resume->cursor;
  } else {
    res.params = init_params(cfg, derive_seed(plan.seed, {0x1417}));
    res.adam = make_adam_state(res.params);
  }
  TrainCursor& cur = res.cursor;
  const Backbone model(cfg);

  const std::span<const Record> val_set =
      opt.validation_limit ? val.first(std::min(val.size(), opt.validation_limit)) : val;
  const std::vector<MaskSpec> val_masks = validation_masks(plan, val_set);

  auto checkpoint = [&] {
    if (opt.checkpoint_path.empty()) return;
    save_checkpoint(Checkpoint{cfg, res.params, res.adam, cur, plan.seed}, opt.checkpoint_path);
  };
  auto run_validation = [&](std::size_t stage, std::size_t epoch) {
    if (val_set.empty()) return;
    ValidationMetrics m = validate_model(model, res.params, val_set, val_masks, opt.threads);
    m.stage = stage;
    m.epoch = epoch;
    m.step = cur.global_step;
    emit(opt.metrics, m);
    res.validation.push_back(m);
  };

  if (!resume) run_validation(0, 0);

  while (cur.stage < 2 && !cur.finished) {
    const TrainPlan& sp = cur.stage == 0 ? plan.stage1 : plan.stage2;
    const std::vector<std::size_t> pool = stage_pool(plan, train.size(), sp.data_fraction);
    const std::size_t batches = (pool.size() + sp.batch_size - 1) / sp.batch_size;

    for (; cur.epoch < sp.epochs; ++cur.epoch) {
      std::vector<std::size_t> order = pool;
      Rng shuffle_rng(derive_seed(plan.seed, {cur.stage, cur.epoch, 0xe90c}));
      std::shuffle(order.begin(), order.end(), shuffle_rng);

      for (; cur.batch < batches; ++cur.batch) {
        if (opt.stop_after_steps && cur.global_step >= *opt.stop_after_steps) {
          checkpoint();
          return res;
        }
        const std::size_t begin = cur.batch * sp.batch_size;
        const std::span<const std::size_t> idx(order.data() + begin,
                                               std::min(sp.batch_size, order.size() - begin));
        Rng batch_rng(derive_seed(plan.seed, {cur.stage, cur.epoch, cur.batch, 0xba7c}));
        const BatchSpec batch = build_batch(train, idx, sp, batch_rng, cfg.n_t_max, cfg.n_f_max);

        std::vector<SampleGradient> per(batch.indices.size());
        parallel_for(per.size(), opt.threads, [&](std::size_t i) {
          const Record& rec = train[batch.indices[i]];
          per[i] = sample_gradient(model, res.params, prepare_sample(rec, batch.masks[i], batch.rows, batch.cols),
                                   rec.gt);
        });

        StepMetrics m;
        m.stage = cur.stage;
        m.epoch = cur.epoch;
        std::vector<Tensor> grads = std::move(per[0].grads);
        for (std::size_t i = 1; i < per.size(); ++i)
          for (std::size_t p = 0; p < grads.size(); ++p) {
            double* dst = grads[p].raw();
            const double* src = per[i].grads[p].raw();
            for (std::size_t k = 0; k < grads[p].size(); ++k) dst[k] += src[k];
          }
        const double inv_n = 1.0 / static_cast<double>(per.size());
        for (Tensor& g : grads)
          for (double& v : g.data()) v *= inv_n;
        for (std::size_t i = 0; i < per.size(); ++i) {
          m.loss += per[i].loss;
          const auto t = static_cast<std::size_t>(batch.masks[i].task);
          m.task_nmse[t] += per[i].loss;
          ++m.task_count[t];
        }
        m.loss *= inv_n;
        for (std::size_t t = 0; t < 3; ++t)
          if (m.task_count[t]) m.task_nmse[t] /= static_cast<double>(m.task_count[t]);
        if (!std::isfinite(m.loss)) {
          checkpoint();
          throw NumericError("non-finite loss at global step " + std::to_string(cur.global_step));
        }

        m.lr = lr_at(cur.stage_step, sp);
        m.grad_norm = clip_global_norm(grads, plan.clip_norm);
        try {
          adam_step(res.params, grads, res.adam, m.lr);
        } catch (const NumericError&) {
          checkpoint();
          throw;
        }
        ++cur.stage_step;
        ++cur.global_step;
        m.step = cur.global_step;
        emit(opt.metrics, m);
        if (opt.on_step) opt.on_step(m);
        res.steps.push_back(m);
        if (opt.checkpoint_every && cur.global_step % opt.checkpoint_every == 0) {
          ++cur.batch;  // the cursor names the next batch to run
          checkpoint();
          --cur.batch;
        }
      }
      cur.batch = 0;
      run_validation(cur.stage, cur.epoch);
    }
    cur.epoch = 0;
    cur.stage_step = 0;
    ++cur.stage;
    if (cur.stage < 2) checkpoint();
  }
  cur.finished = true;
  checkpoint();
  return res;
}

}  // namespace ddafm
