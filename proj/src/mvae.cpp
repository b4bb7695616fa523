#include "stsim/mvae.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stsim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Modality m) {
  switch (m) {
    case Modality::kVisual: return "visual";
    case Modality::kTactile: return "tactile";
    case Modality::kPose: return "pose";
  }
  return "visual";
}

std::vector<ModalitySet> nonempty_subsets(ModalitySet available) {
  std::vector<ModalitySet> out;
  for (ModalitySet s = 1; s <= kAllModalities; ++s) {
    if ((s & available) == s) out.push_back(s);
  }
  return out;
}

void GaussianBelief::validate() const {
  if (mean.size() != var.size()) throw InvalidInput("belief mean and variance sizes differ");
  for (Eigen::Index i = 0; i < var.size(); ++i) {
    if (!(var[i] > 0.0) || !std::isfinite(var[i])) {
      throw InvalidInput("belief variance must be positive and finite (component " + std::to_string(i) + ")");
    }
  }
}

GaussianBelief poe_fuse(const std::vector<GaussianBelief>& experts, std::size_t latent_dim) {
  const auto n = static_cast<Eigen::Index>(latent_dim);
  VectorXd precision = VectorXd::Ones(n);
  VectorXd weighted = VectorXd::Zero(n);
  for (const GaussianBelief& e : experts) {
    e.validate();
    if (e.mean.size() != n) throw InvalidInput("expert dimension does not match latent_dim");
    precision.array() += e.var.array().inverse();
    weighted.array() += e.mean.array() / e.var.array();
  }
  GaussianBelief out;
  out.var = precision.array().inverse();
  out.mean = weighted.array() * out.var.array();
  return out;
}

double gaussian_kl(const GaussianBelief& q) {
  q.validate();
  return 0.5 * (q.mean.array().square() + q.var.array() - q.var.array().log() - 1.0).sum();
}

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double bce_logits(const MatrixXd& logits, const MatrixXd& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw InvalidInput("bce_logits: logits and targets differ in shape");
  }
  if (logits.size() == 0) throw InvalidInput("bce_logits: empty input");
  if ((targets.array() < 0.0).any() || (targets.array() > 1.0).any()) {
    throw InvalidInput("bce_logits: targets must lie in [0, 1]");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    sum += softplus(logits(i)) - targets(i) * logits(i);
  }
  return sum / static_cast<double>(logits.size());
}

VectorXd reparameterize(const GaussianBelief& q, const VectorXd& noise) {
  q.validate();
  if (noise.size() != q.mean.size()) throw InvalidInput("noise dimension does not match the belief");
  return q.mean.array() + q.var.array().sqrt() * noise.array();
}

double beta_schedule(double epoch, double anneal_epochs) {
  if (!(anneal_epochs >= 1.0)) throw InvalidInput("anneal_epochs must be >= 1");
  return std::clamp(epoch / anneal_epochs, 0.0, 1.0);
}

bool adam_step(VectorXd& params, const VectorXd& grads, AdamState& s, const AdamParams& p) {
  if (grads.size() != params.size()) throw InvalidInput("adam_step: gradient size does not match parameters");
  if (!grads.allFinite()) return false;
  if (s.m.size() != params.size()) {
    s.m = VectorXd::Zero(params.size());
    s.v = VectorXd::Zero(params.size());
  }
  s.step += 1;
  s.m = p.beta1 * s.m + (1.0 - p.beta1) * grads;
  s.v = p.beta2 * s.v + (1.0 - p.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(s.step));
  params.array() -= p.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + p.eps);
  return true;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; 1 - u keeps the logarithm finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

MatrixXd sample_noise(Rng& rng, std::size_t latent_dim, std::size_t batch) {
  MatrixXd e(latent_dim, batch);
  for (Eigen::Index j = 0; j < e.cols(); ++j) {
    for (Eigen::Index i = 0; i < e.rows(); ++i) e(i, j) = rng.normal();
  }
  return e;
}

double swish(double x) { return x * sigmoid(x); }

double swish_grad(double x) {
  const double s = sigmoid(x);
  return s + x * s * (1.0 - s);
}

Mlp::Mlp(const std::vector<std::size_t>& widths, std::size_t& offset) {
  if (widths.size() < 2) throw InvalidInput("an MLP needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    DenseLayout l{offset, widths[i], widths[i + 1]};
    layers_.push_back(l);
    offset += l.size();
  }
}

namespace {

using ConstMap = Eigen::Map<const MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;

ConstMap weights(const VectorXd& p, const DenseLayout& l) {
  return ConstMap(p.data() + l.offset, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
}
ConstVecMap bias(const VectorXd& p, const DenseLayout& l) {
  return ConstVecMap(p.data() + l.offset + l.out * l.in, static_cast<Eigen::Index>(l.out));
}

}  // namespace

MatrixXd Mlp::forward(const VectorXd& params, const MatrixXd& x, MlpCache* cache) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim()) throw InvalidInput("MLP input has the wrong width");
  if (cache) {
    cache->pre.clear();
    cache->post.clear();
  }
  MatrixXd h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayout& l = layers_[i];
    MatrixXd a = weights(params, l) * h;
    a.colwise() += bias(params, l);
    if (cache) cache->post.push_back(std::move(h));
    if (i + 1 < layers_.size()) {
      h = a.unaryExpr([](double v) { return swish(v); });
    } else {
      h = a;
    }
    if (cache) cache->pre.push_back(std::move(a));
  }
  return h;
}

MatrixXd Mlp::backward(const VectorXd& params, const MlpCache& cache, const MatrixXd& d_out, VectorXd& grads) const {
  MatrixXd d = d_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const DenseLayout& l = layers_[i];
    if (i + 1 < layers_.size()) d.array() *= cache.pre[i].unaryExpr([](double v) { return swish_grad(v); }).array();
    Eigen::Map<MatrixXd> gw(grads.data() + l.offset, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
    Eigen::Map<VectorXd> gb(grads.data() + l.offset + l.out * l.in, static_cast<Eigen::Index>(l.out));
    gw.noalias() += d * cache.post[i].transpose();
    gb += d.rowwise().sum();
    d = weights(params, l).transpose() * d;
  }
  return d;
}

std::size_t ModelConfig::modality_dim(Modality m) const {
  return m == Modality::kPose ? kPoseDim : image_side * image_side * 3;
}

void ModelConfig::validate() const {
  if (modalities == 0 || modalities > kAllModalities) throw InvalidInput("model needs at least one modality");
  if (image_side == 0 || latent_dim == 0) throw InvalidInput("image_side and latent_dim must be positive");
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    if (!(lambda[m] > 0.0)) throw InvalidInput("modality weights must be positive");
  }
  for (std::size_t w : hidden) {
    if (w == 0) throw InvalidInput("hidden widths must be positive");
  }
  if (!(logvar_limit > 0.0)) throw InvalidInput("logvar_limit must be positive");
}

MvaeModel::MvaeModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    const auto m = static_cast<Modality>(i);
    if (!has_modality(m)) continue;
    std::vector<std::size_t> enc{cfg_.modality_dim(m) + cfg_.condition_dim};
    enc.insert(enc.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    enc.push_back(2 * cfg_.latent_dim);
    encoders_[i] = Mlp(enc, offset);
    std::vector<std::size_t> dec{cfg_.latent_dim + cfg_.condition_dim};
    dec.insert(dec.end(), cfg_.hidden.rbegin(), cfg_.hidden.rend());
    dec.push_back(cfg_.modality_dim(m));
    decoders_[i] = Mlp(dec, offset);
  }
  params_ = VectorXd::Zero(static_cast<Eigen::Index>(offset));
  Rng rng(cfg_.seed);
  auto init = [&](const Mlp& net) {
    for (const DenseLayout& l : net.layers()) {
      const double limit = std::sqrt(3.0 / static_cast<double>(l.in));
      for (std::size_t k = 0; k < l.out * l.in; ++k) {
        params_[static_cast<Eigen::Index>(l.offset + k)] = limit * (2.0 * rng.uniform() - 1.0);
      }
    }
  };
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    if (!has_modality(static_cast<Modality>(i))) continue;
    init(encoders_[i]);
    init(decoders_[i]);
  }
}

namespace {

MatrixXd with_condition(const MatrixXd& x, const MatrixXd& c, std::size_t cond_dim) {
  if (cond_dim == 0) return x;
  if (static_cast<std::size_t>(c.rows()) != cond_dim || c.cols() != x.cols()) {
    throw InvalidInput("condition matrix has the wrong shape");
  }
  MatrixXd out(x.rows() + c.rows(), x.cols());
  out << x, c;
  return out;
}

struct Encoded {
  MlpCache cache;
  MatrixXd mu;
  MatrixXd logvar;
  MatrixXd precision;  // exp(-logvar)
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> clamped;
  MatrixXd d_out;      // accumulated gradient wrt encoder output
  bool active = false;
};

void check_batch(const ModelConfig& cfg, const Batch& batch, bool need_targets) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    const auto m = static_cast<Modality>(i);
    if (!has(cfg.modalities, m)) continue;
    const auto d = static_cast<Eigen::Index>(cfg.modality_dim(m));
    if (batch.input[i].rows() != d || batch.input[i].cols() != b) {
      throw InvalidInput(to_string(m) + " input has shape " + std::to_string(batch.input[i].rows()) + "x" +
                         std::to_string(batch.input[i].cols()) + ", expected " + std::to_string(d) + "x" +
                         std::to_string(b));
    }
    if (need_targets && (batch.target[i].rows() != d || batch.target[i].cols() != b)) {
      throw InvalidInput(to_string(m) + " target has the wrong shape");
    }
  }
}

std::vector<Eigen::Index> columns_with(const Batch& batch, ModalitySet subset) {
  std::vector<Eigen::Index> idx;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if ((batch.available[b] & subset) == subset) idx.push_back(static_cast<Eigen::Index>(b));
  }
  return idx;
}

}  // namespace

std::vector<GaussianBelief> MvaeModel::encode(Modality m, const MatrixXd& x, const MatrixXd& condition) const {
  if (!has_modality(m)) throw InvalidInput("model has no " + to_string(m) + " encoder");
  const MatrixXd out = encoder(m).forward(params_, with_condition(x, condition, cfg_.condition_dim), nullptr);
  const auto L = static_cast<Eigen::Index>(cfg_.latent_dim);
  std::vector<GaussianBelief> beliefs(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    beliefs[j].mean = out.col(j).head(L);
    beliefs[j].var = out.col(j).tail(L).cwiseMax(-cfg_.logvar_limit).cwiseMin(cfg_.logvar_limit).array().exp();
  }
  return beliefs;
}

LossBreakdown MvaeModel::loss(const Batch& batch, const std::vector<ModalitySet>& subsets, double beta,
                              const MatrixXd& noise, VectorXd* grad) const {
  check_batch(cfg_, batch, true);
  const std::size_t B = batch.size();
  if (B == 0) throw InvalidInput("empty batch");
  const auto L = static_cast<Eigen::Index>(cfg_.latent_dim);
  if (noise.rows() != L || noise.cols() != static_cast<Eigen::Index>(B)) throw InvalidInput("noise has the wrong shape");
  if (grad && grad->size() != params_.size()) *grad = VectorXd::Zero(params_.size());

  ModalitySet used = 0;
  for (ModalitySet s : subsets) {
    if (s == 0) throw InvalidInput("the empty modality subset has no ELBO");
    if ((s & cfg_.modalities) != s) throw InvalidInput("subset uses a modality the model does not have");
    used |= s;
  }

  LossBreakdown out;
  const double w = 1.0 / static_cast<double>(B);
  const double lim = cfg_.logvar_limit;

  std::array<Encoded, kModalityCount> enc;
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    if (!has(used, static_cast<Modality>(i))) continue;
    Encoded& e = enc[i];
    e.active = true;
    const MatrixXd o = encoders_[i].forward(params_, with_condition(batch.input[i], batch.condition, cfg_.condition_dim),
                                            &e.cache);
    e.mu = o.topRows(L);
    const MatrixXd raw = o.bottomRows(L);
    e.clamped = raw.array().abs() > lim;
    e.logvar = raw.cwiseMax(-lim).cwiseMin(lim);
    e.precision = (-e.logvar.array()).exp();
    e.d_out = MatrixXd::Zero(o.rows(), o.cols());
    out.clamped_logvars += static_cast<std::size_t>(e.clamped.count());
  }

  for (ModalitySet s : subsets) {
    const std::vector<Eigen::Index> idx = columns_with(batch, s);
    if (idx.empty()) continue;
    const auto n = static_cast<Eigen::Index>(idx.size());
    out.terms += idx.size();

    MatrixXd prec = MatrixXd::Ones(L, n);
    MatrixXd num = MatrixXd::Zero(L, n);
    for (std::size_t i = 0; i < kModalityCount; ++i) {
      if (!has(s, static_cast<Modality>(i))) continue;
      const MatrixXd p = enc[i].precision(Eigen::all, idx);
      prec += p;
      num.array() += enc[i].mu(Eigen::all, idx).array() * p.array();
    }
    const MatrixXd var = prec.array().inverse();
    const MatrixXd mu = num.array() * var.array();
    const MatrixXd sigma = var.array().sqrt();
    const MatrixXd eps = noise(Eigen::all, idx);
    const MatrixXd z = mu.array() + sigma.array() * eps.array();
    MatrixXd cond;
    if (cfg_.condition_dim > 0) cond = batch.condition(Eigen::all, idx);
    const MatrixXd dec_in = with_condition(z, cond, cfg_.condition_dim);

    const double kl = 0.5 * (mu.array().square() + var.array() - var.array().log() - 1.0).sum();
    out.kl += kl * w;
    out.total += beta * kl * w;

    MatrixXd dz = MatrixXd::Zero(L, n);
    for (std::size_t h = 0; h < kModalityCount; ++h) {
      const auto m = static_cast<Modality>(h);
      if (!has_modality(m)) continue;
      MlpCache cache;
      const MatrixXd logits = decoders_[h].forward(params_, dec_in, grad ? &cache : nullptr);
      const MatrixXd target = batch.target[h](Eigen::all, idx);
      const double D = static_cast<double>(logits.rows());
      MatrixXd d_logits;
      double recon = 0.0;
      if (m == Modality::kPose) {
        const MatrixXd diff = logits - target;
        recon = diff.squaredNorm() / D;
        if (grad) d_logits = (2.0 * cfg_.lambda[h] * w / D) * diff;
      } else {
        for (Eigen::Index k = 0; k < logits.size(); ++k) recon += softplus(logits(k)) - target(k) * logits(k);
        recon /= D;
        if (grad) d_logits = (cfg_.lambda[h] * w / D) * (logits.unaryExpr([](double v) { return sigmoid(v); }) - target);
      }
      out.recon[h] += recon * w;
      out.total += cfg_.lambda[h] * recon * w;
      if (grad) dz += decoders_[h].backward(params_, cache, d_logits, *grad).topRows(L);
    }
    if (!grad) continue;

    // Back through z = mu + sigma * eps and the precision-weighted fusion.
    const MatrixXd g_mu = dz.array() + beta * w * mu.array();
    const MatrixXd g_var = dz.array() * eps.array() / (2.0 * sigma.array()) + 0.5 * beta * w * (1.0 - prec.array());
    const MatrixXd g_prec = -(g_var.array() * var.array().square() + g_mu.array() * mu.array() * var.array());
    const MatrixXd g_num = g_mu.array() * var.array();
    for (std::size_t i = 0; i < kModalityCount; ++i) {
      if (!has(s, static_cast<Modality>(i))) continue;
      Encoded& e = enc[i];
      const MatrixXd p = e.precision(Eigen::all, idx);
      const MatrixXd mu_m = e.mu(Eigen::all, idx);
      const MatrixXd d_mu = g_num.array() * p.array();
      MatrixXd d_lv = -p.array() * (g_num.array() * mu_m.array() + g_prec.array());
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index r = 0; r < L; ++r) {
          if (e.clamped(r, idx[j])) d_lv(r, j) = 0.0;
        }
        e.d_out.col(idx[j]).head(L) += d_mu.col(j);
        e.d_out.col(idx[j]).tail(L) += d_lv.col(j);
      }
    }
  }

  if (grad) {
    for (std::size_t i = 0; i < kModalityCount; ++i) {
      if (enc[i].active) encoders_[i].backward(params_, enc[i].cache, enc[i].d_out, *grad);
    }
  }
  if (!std::isfinite(out.total)) throw NumericalError("loss is not finite");
  return out;
}

LossBreakdown MvaeModel::subset_loss(const Batch& batch, double beta, const MatrixXd& noise, VectorXd* grad) const {
  return loss(batch, nonempty_subsets(cfg_.modalities), beta, noise, grad);
}

LossBreakdown MvaeModel::elbo(const Batch& batch, ModalitySet inputs, double beta, const MatrixXd& noise,
                              VectorXd* grad) const {
  if (inputs == 0) throw InvalidInput("elbo needs a non-empty input subset");
  return loss(batch, {inputs}, beta, noise, grad);
}

Prediction MvaeModel::predict(const Batch& batch, ModalitySet use, const MatrixXd& noise) const {
  check_batch(cfg_, batch, false);
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto L = static_cast<Eigen::Index>(cfg_.latent_dim);
  const double lim = cfg_.logvar_limit;
  use &= cfg_.modalities;

  MatrixXd prec = MatrixXd::Ones(L, B);
  MatrixXd num = MatrixXd::Zero(L, B);
  Prediction pred;
  pred.prior_only.assign(batch.size(), true);
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    if (!has(use, static_cast<Modality>(i))) continue;
    bool any = false;
    for (ModalitySet a : batch.available) any = any || has(a, static_cast<Modality>(i));
    if (!any) continue;
    const MatrixXd o =
        encoders_[i].forward(params_, with_condition(batch.input[i], batch.condition, cfg_.condition_dim), nullptr);
    const MatrixXd p = (-o.bottomRows(L).cwiseMax(-lim).cwiseMin(lim).array()).exp();
    for (Eigen::Index j = 0; j < B; ++j) {
      if (!has(batch.available[j], static_cast<Modality>(i))) continue;
      pred.prior_only[j] = false;
      prec.col(j) += p.col(j);
      num.col(j).array() += o.col(j).head(L).array() * p.col(j).array();
    }
  }
  const MatrixXd var = prec.array().inverse();
  MatrixXd z = num.array() * var.array();
  if (noise.size() > 0) {
    if (noise.rows() != L || noise.cols() != B) throw InvalidInput("noise has the wrong shape");
    z.array() += var.array().sqrt() * noise.array();
  }
  const MatrixXd dec_in = with_condition(z, batch.condition, cfg_.condition_dim);
  for (std::size_t h = 0; h < kModalityCount; ++h) {
    const auto m = static_cast<Modality>(h);
    if (!has_modality(m)) continue;
    pred.logits[h] = decoders_[h].forward(params_, dec_in, nullptr);
    pred.value[h] = m == Modality::kPose ? pred.logits[h] : pred.logits[h].unaryExpr([](double v) { return sigmoid(v); });
  }
  return pred;
}

GradCheckResult gradient_check(const MvaeModel& model, const Batch& batch, double beta, const MatrixXd& noise,
                               std::size_t samples, double h, std::uint64_t seed, double floor) {
  VectorXd analytic = VectorXd::Zero(model.parameters().size());
  const double base = model.subset_loss(batch, beta, noise, &analytic).total;
  const double scale = floor * std::max(1.0, std::abs(base));
  MvaeModel probe = model;
  Rng rng(seed);
  GradCheckResult res;
  const std::size_t n = model.parameter_count();
  // Distinct indices: partial Fisher-Yates.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const std::size_t count = std::min(samples, n);
  for (std::size_t s = 0; s < count; ++s) std::swap(order[s], order[s + rng.below(n - s)]);
  for (std::size_t s = 0; s < count; ++s) {
    const auto k = static_cast<Eigen::Index>(order[s]);
    const double orig = probe.parameters()[k];
    probe.parameters()[k] = orig + h;
    const double up = probe.subset_loss(batch, beta, noise, nullptr).total;
    probe.parameters()[k] = orig - h;
    const double down = probe.subset_loss(batch, beta, noise, nullptr).total;
    probe.parameters()[k] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[k];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), scale});
    if (rel > res.max_relative_error) {
      res.max_relative_error = rel;
      res.worst_index = static_cast<std::size_t>(k);
    }
    ++res.checked;
  }
  return res;
}

}  // namespace stsim
