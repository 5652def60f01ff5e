// SPDX-License-Identifier: Apache-2.0
#include "rpgan/train/trainer.hpp"

#include <cmath>

#include "rpgan/autodiff/ops.hpp"
#include "rpgan/autodiff/tape.hpp"
#include "rpgan/io/errors.hpp"
#include "rpgan/train/losses.hpp"

namespace rpgan::train {

std::string_view to_string(LossVariant v) {
  return v == LossVariant::HingeSN ? "hinge-sn" : "wgan-penalty";
}

LossVariant parse_loss_variant(std::string_view text) {
  if (text == "hinge-sn") return LossVariant::HingeSN;
  if (text == "wgan-penalty") return LossVariant::WganPenalty;
  throw std::invalid_argument("unknown loss variant '" + std::string(text) +
                              "' (expected hinge-sn or wgan-penalty)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (!(lr > 0)) fail("train.lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) fail("train.beta1 must be in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) fail("train.beta2 must be in [0, 1)");
  if (d_steps == 0) fail("train.d_steps must be >= 1");
  if (batch == 0) fail("train.batch must be >= 1");
  if (!(diversity_weight >= 0)) fail("train.diversity_weight must be >= 0");
  if (!(penalty_coef >= 0)) fail("train.penalty_coef must be >= 0");
}

io::CsvWriter TrainReport::loss_csv() const {
  io::CsvWriter csv({"step", "loss_d", "loss_g", "diversity_term"});
  for (const auto& r : rows) {
    csv.add_row({std::to_string(r.step), io::format_number(r.loss_d), io::format_number(r.loss_g),
                 io::format_number(r.diversity)});
  }
  return csv;
}

io::CsvWriter TrainReport::route_csv() const {
  io::CsvWriter csv({"bucket", "instance", "count"});
  for (std::size_t b = 0; b < route_counts.size(); ++b)
    for (std::size_t i = 0; i < route_counts[b].size(); ++i)
      csv.add_row({std::to_string(b + 1), std::to_string(i), std::to_string(route_counts[b][i])});
  return csv;
}

NumericalError::NumericalError(std::size_t step_, double d, double g)
    : std::runtime_error("non-finite loss at step " + std::to_string(step_) +
                         ": loss_d=" + io::format_number(d) + " loss_g=" + io::format_number(g)),
      step(step_),
      loss_d(d),
      loss_g(g) {}

template <typename T>
Trainer<T>::Trainer(Generator<T>& gen, Discriminator<T>& disc, const io::Dataset& data,
                    TrainConfig cfg)
    : gen_(gen),
      disc_(disc),
      data_(data),
      cfg_(cfg),
      rng_(cfg.seed),
      gen_opt_(gen.parameters(), cfg.adam()),
      disc_opt_(disc.parameters(), cfg.adam()) {
  cfg_.validate();
  data_.validate();
  Shape expected = gen_.output_shape();
  if (data_.sample_shape != expected) {
    throw ad::ShapeError("dataset samples are " + ad::to_string(data_.sample_shape) +
                         " but the generator produces " + ad::to_string(expected));
  }
  disc_.set_spectral_norm(cfg_.loss == LossVariant::HingeSN);
}

template <typename T>
Tensor<T> Trainer<T>::discriminator_step() {
  auto real = data_.template sample_batch<T>(cfg_.batch, rng_);
  Tensor<T> fake;
  {
    ad::NoGradGuard no_grad;
    fake = gen_.batch_forward(cfg_.batch, rng_).first;
  }
  disc_opt_.zero_grad();
  auto d_real = disc_.forward(real, true);
  auto d_fake = disc_.forward(fake, true);
  Tensor<T> loss;
  if (cfg_.loss == LossVariant::HingeSN) {
    loss = hinge_losses(d_real, d_fake).d;
  } else {
    Critic<T> critic = [this](const Tensor<T>& x) { return disc_.forward(x, false); };
    auto penalty = gradient_penalty(critic, real, fake, rng_);
    loss = wgan_penalty_losses(d_real, d_fake, penalty, static_cast<T>(cfg_.penalty_coef)).d;
  }
  ad::backward(loss);
  disc_opt_.step();
  return loss;
}

template <typename T>
TrainReport Trainer<T>::run() {
  return run(cfg_.steps);
}

template <typename T>
TrainReport Trainer<T>::run(std::size_t steps) {
  TrainReport report;
  for (const auto& b : gen_.buckets()) report.route_counts.emplace_back(b.size(), 0);
  const T lambda = static_cast<T>(cfg_.diversity_weight);
  for (std::size_t s = 0; s < steps; ++s, ++done_) {
    double loss_d = 0.0;
    for (std::size_t k = 0; k < cfg_.d_steps; ++k) loss_d = static_cast<double>(discriminator_step().item());

    gen_opt_.zero_grad();
    auto [fake, routes] = gen_.batch_forward(cfg_.batch, rng_);
    for (const auto& r : routes)
      for (std::size_t b = 0; b < r.size(); ++b) report.route_counts[b][r[b]]++;
    auto adversarial = ad::neg(ad::mean(disc_.forward(fake, false)));
    auto diversity = lambda > T(0) ? diversity_loss(gen_) : Tensor<T>::scalar(T(0));
    auto total = lambda > T(0) ? ad::add(adversarial, ad::scale(diversity, lambda)) : adversarial;
    const double loss_g = static_cast<double>(adversarial.item());
    if (!std::isfinite(loss_d) || !std::isfinite(loss_g) || !std::isfinite(total.item())) {
      throw NumericalError(done_, loss_d, loss_g);
    }
    ad::backward(total);
    gen_opt_.step();
    report.rows.push_back({done_, loss_d, loss_g, static_cast<double>(diversity.item())});
  }
  if (steps > 0) disc_.mark_trained();
  return report;
}

template <typename T>
TrainReport train(Generator<T>& gen, Discriminator<T>& disc, const io::Dataset& data,
                  const TrainConfig& cfg) {
  Trainer<T> trainer(gen, disc, data, cfg);
  return trainer.run();
}

void put_adam(io::Checkpoint& ckpt, Adam<float>& opt, const std::string& prefix) {
  std::erase_if(ckpt.optimizer, [&](const io::NamedTensor& t) { return t.name.starts_with(prefix); });
  for (std::size_t i = 0; i < opt.params().size(); ++i) {
    const auto& p = opt.params()[i];
    auto& m = opt.first_moment(i);
    auto& v = opt.second_moment(i);
    ckpt.optimizer.push_back({prefix + "m." + p.name, p.tensor.shape(), std::vector<float>(m.begin(), m.end())});
    ckpt.optimizer.push_back({prefix + "v." + p.name, p.tensor.shape(), std::vector<float>(v.begin(), v.end())});
  }
  ckpt.counters[prefix + "step"] = opt.steps();
}

void get_adam(const io::Checkpoint& ckpt, Adam<float>& opt, const std::string& prefix) {
  auto find = [&](const std::string& name) -> const io::NamedTensor& {
    for (const auto& t : ckpt.optimizer)
      if (t.name == name) return t;
    throw io::FormatError("checkpoint has no optimizer tensor '" + name + "'");
  };
  for (std::size_t i = 0; i < opt.params().size(); ++i) {
    const auto& p = opt.params()[i];
    const auto& m = find(prefix + "m." + p.name);
    const auto& v = find(prefix + "v." + p.name);
    if (m.data.size() != p.tensor.numel() || v.data.size() != p.tensor.numel()) {
      throw io::FormatError("optimizer state for '" + p.name + "' has the wrong size");
    }
    opt.first_moment(i).assign(m.data.begin(), m.data.end());
    opt.second_moment(i).assign(v.data.begin(), v.data.end());
  }
  auto it = ckpt.counters.find(prefix + "step");
  if (it == ckpt.counters.end()) throw io::FormatError("checkpoint has no counter '" + prefix + "step'");
  opt.set_steps(it->second);
}

template class Trainer<float>;
template class Trainer<double>;
template TrainReport train(Generator<float>&, Discriminator<float>&, const io::Dataset&, const TrainConfig&);
template TrainReport train(Generator<double>&, Discriminator<double>&, const io::Dataset&, const TrainConfig&);

}  // namespace rpgan::train
