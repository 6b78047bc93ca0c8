#pragma once

// Finite-difference checks over every primitive and every loss, on small
// random instances. Shared by the CLI and the test suites.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "darsd/contrastive.hpp"
#include "darsd/gradcheck.hpp"
#include "darsd/lcib.hpp"
#include "darsd/networks.hpp"
#include "darsd/ops.hpp"
#include "darsd/rng.hpp"

namespace darsd {

struct GradCheckCase {
  std::string name;
  // Builds a fresh random instance: returns the function and its inputs.
  std::function<std::pair<ScalarFunction, std::vector<Tensor>>(Rng&)> make;
};

namespace detail {

// Reduces any tensor to a scalar with fixed random weights, so every output
// coordinate contributes a distinct gradient.
inline Tensor weighted_sum(const Tensor& t, const Tensor& w) { return sum(mul(t, w)); }

inline std::vector<std::size_t> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i < classes ? i : rng.index(classes);
  rng.shuffle(out);
  return out;
}

}  // namespace detail

inline std::vector<GradCheckCase> primitive_gradcheck_cases() {
  using detail::weighted_sum;
  std::vector<GradCheckCase> cases;
  auto unary = [&](std::string name, std::function<Tensor(const Tensor&)> op, double lo,
                   double hi) {
    cases.push_back({name, [op, lo, hi](Rng& rng) {
                       const std::size_t r = 2 + rng.index(4), c = 2 + rng.index(4);
                       Tensor x = rng.uniform_tensor({r, c}, lo, hi, true);
                       Shape out_shape;
                       {
                         NoGradScope probe;
                         out_shape = op(x).shape();
                       }
                       Tensor w = rng.normal_tensor(out_shape);
                       ScalarFunction f = [op, w](const std::vector<Tensor>& in) {
                         return weighted_sum(op(in[0]), w);
                       };
                       return std::make_pair(f, std::vector<Tensor>{x});
                     }});
  };
  unary("relu", [](const Tensor& x) { return relu(x); }, -2.0, 2.0);
  unary("exp", [](const Tensor& x) { return exp(x); }, -2.0, 2.0);
  unary("log", [](const Tensor& x) { return log(x); }, 0.2, 3.0);
  unary("softmax", [](const Tensor& x) { return softmax(x); }, -3.0, 3.0);
  unary("sum_axis0", [](const Tensor& x) { return sum(x, 0); }, -1.0, 1.0);
  unary("mean_axis1", [](const Tensor& x) { return mean(x, 1); }, -1.0, 1.0);
  unary("mean_all", [](const Tensor& x) { return mean(x); }, -1.0, 1.0);
  unary("mul_scalar", [](const Tensor& x) { return mul(x, -2.5); }, -1.0, 1.0);

  cases.push_back({"add_broadcast", [](Rng& rng) {
                     const std::size_t r = 2 + rng.index(4), c = 2 + rng.index(4);
                     Tensor a = rng.normal_tensor({r, c}, 1.0, true);
                     Tensor b = rng.normal_tensor({c}, 1.0, true);
                     Tensor w = rng.normal_tensor({r, c});
                     ScalarFunction f = [w](const std::vector<Tensor>& in) {
                       return detail::weighted_sum(add(in[0], in[1]), w);
                     };
                     return std::make_pair(f, std::vector<Tensor>{a, b});
                   }});
  cases.push_back({"mul", [](Rng& rng) {
                     const std::size_t r = 2 + rng.index(4), c = 2 + rng.index(4);
                     Tensor a = rng.normal_tensor({r, c}, 1.0, true);
                     Tensor b = rng.normal_tensor({r, c}, 1.0, true);
                     Tensor w = rng.normal_tensor({r, c});
                     ScalarFunction f = [w](const std::vector<Tensor>& in) {
                       return detail::weighted_sum(mul(in[0], in[1]), w);
                     };
                     return std::make_pair(f, std::vector<Tensor>{a, b});
                   }});
  for (bool transposed : {false, true}) {
    cases.push_back({transposed ? "matmul_bt" : "matmul", [transposed](Rng& rng) {
                       const std::size_t p = 1 + rng.index(4), q = 1 + rng.index(4),
                                         r = 1 + rng.index(4);
                       Tensor a = rng.normal_tensor({p, q}, 1.0, true);
                       Tensor b = rng.normal_tensor(transposed ? Shape{r, q} : Shape{q, r}, 1.0, true);
                       Tensor w = rng.normal_tensor({p, r});
                       ScalarFunction f = [w, transposed](const std::vector<Tensor>& in) {
                         return detail::weighted_sum(
                             matmul(in[0], in[1], transposed ? Transpose::yes : Transpose::no), w);
                       };
                       return std::make_pair(f, std::vector<Tensor>{a, b});
                     }});
  }
  cases.push_back({"cosine_similarity", [](Rng& rng) {
                     const std::size_t n = 1 + rng.index(4), k = 1 + rng.index(4),
                                       d = 2 + rng.index(5);
                     Tensor a = rng.normal_tensor({n, d}, 1.0, true);
                     Tensor b = rng.normal_tensor({k, d}, 1.0, true);
                     Tensor w = rng.normal_tensor({n, k});
                     ScalarFunction f = [w](const std::vector<Tensor>& in) {
                       return detail::weighted_sum(cosine_similarity(in[0], in[1]), w);
                     };
                     return std::make_pair(f, std::vector<Tensor>{a, b});
                   }});
  cases.push_back({"conv1d", [](Rng& rng) {
                     const std::size_t b = 1 + rng.index(2), T = 4 + rng.index(5),
                                       c = 1 + rng.index(3), o = 1 + rng.index(3),
                                       k = 1 + rng.index(3), dil = 1 + rng.index(2);
                     Tensor x = rng.normal_tensor({b, T, c}, 1.0, true);
                     Tensor wt = rng.normal_tensor({o, k, c}, 1.0, true);
                     Tensor bias = rng.normal_tensor({o}, 1.0, true);
                     Tensor w = rng.normal_tensor({b, T, o});
                     ScalarFunction f = [w, dil](const std::vector<Tensor>& in) {
                       return detail::weighted_sum(conv1d(in[0], in[1], in[2], dil), w);
                     };
                     return std::make_pair(f, std::vector<Tensor>{x, wt, bias});
                   }});
  cases.push_back({"concat", [](Rng& rng) {
                     const std::size_t axis = rng.index(2);
                     Tensor a = rng.normal_tensor({3, 2}, 1.0, true);
                     Tensor b = rng.normal_tensor(axis == 0 ? Shape{2, 2} : Shape{3, 4}, 1.0, true);
                     Tensor w = rng.normal_tensor(axis == 0 ? Shape{5, 2} : Shape{3, 6});
                     ScalarFunction f = [w, axis](const std::vector<Tensor>& in) {
                       return detail::weighted_sum(concat({in[0], in[1]}, axis), w);
                     };
                     return std::make_pair(f, std::vector<Tensor>{a, b});
                   }});
  cases.push_back({"gather_rows", [](Rng& rng) {
                     Tensor a = rng.normal_tensor({5, 3}, 1.0, true);
                     std::vector<std::size_t> idx{rng.index(5), rng.index(5), rng.index(5), 4};
                     Tensor w = rng.normal_tensor({4, 3});
                     ScalarFunction f = [w, idx](const std::vector<Tensor>& in) {
                       return detail::weighted_sum(gather_rows(in[0], idx), w);
                     };
                     return std::make_pair(f, std::vector<Tensor>{a});
                   }});
  cases.push_back({"pick", [](Rng& rng) {
                     Tensor a = rng.normal_tensor({4, 3}, 1.0, true);
                     std::vector<std::size_t> idx{rng.index(3), rng.index(3), rng.index(3), 2};
                     Tensor w = rng.normal_tensor({4});
                     ScalarFunction f = [w, idx](const std::vector<Tensor>& in) {
                       return detail::weighted_sum(pick(in[0], idx), w);
                     };
                     return std::make_pair(f, std::vector<Tensor>{a});
                   }});
  return cases;
}

inline std::vector<GradCheckCase> loss_gradcheck_cases() {
  std::vector<GradCheckCase> cases;
  cases.push_back({"adversarial_loss", [](Rng& rng) {
                     const std::size_t n = 2 + rng.index(3), d = 4;
                     auto disc = std::make_shared<Discriminator>(Discriminator::init(d, 5, rng));
                     Tensor f = rng.normal_tensor({n, d}, 1.0, true);
                     Tensor fh = rng.normal_tensor({n, d}, 1.0, true);
                     ScalarFunction fn = [disc](const std::vector<Tensor>& in) {
                       return adversarial_loss(*disc, in[0], in[1]);
                     };
                     std::vector<Tensor> inputs{f, fh};
                     for (auto& p : disc->params()) inputs.push_back(p.value);
                     return std::make_pair(fn, inputs);
                   }});
  cases.push_back({"supervised_contrastive_loss", [](Rng& rng) {
                     const std::size_t n = 4 + rng.index(5);
                     const auto labels = detail::random_labels(n, 2 + rng.index(2), rng);
                     Tensor f = rng.normal_tensor({n, 6}, 1.0, true);
                     const double tau = rng.uniform(0.1, 1.0);
                     ScalarFunction fn = [labels, tau](const std::vector<Tensor>& in) {
                       return supervised_contrastive_loss(in[0], labels, tau);
                     };
                     return std::make_pair(fn, std::vector<Tensor>{f});
                   }});
  cases.push_back({"self_consistency_loss", [](Rng& rng) {
                     const std::size_t k = 2 + rng.index(7);
                     Tensor a = rng.normal_tensor({k, 6}, 1.0, true);
                     Tensor b = rng.normal_tensor({k, 6}, 1.0, true);
                     const double tau = rng.uniform(0.1, 1.0);
                     ScalarFunction fn = [tau](const std::vector<Tensor>& in) {
                       return self_consistency_loss(in[0], in[1], tau);
                     };
                     return std::make_pair(fn, std::vector<Tensor>{a, b});
                   }});
  cases.push_back({"anti_divergence_loss", [](Rng& rng) {
                     const std::size_t k = 1 + rng.index(4), ns = 2 + rng.index(6);
                     Tensor a = rng.normal_tensor({k, 6}, 1.0, true);
                     Tensor s = rng.normal_tensor({ns, 6}, 1.0, true);
                     const double tau = rng.uniform(0.1, 1.0);
                     ScalarFunction fn = [tau](const std::vector<Tensor>& in) {
                       return anti_divergence_loss(in[0], in[1], tau);
                     };
                     return std::make_pair(fn, std::vector<Tensor>{a, s});
                   }});
  cases.push_back({"total_loss", [](Rng& rng) {
                     // Full objective on a 4 + 4 batch: encoder -> LCIB -> all terms.
                     const std::size_t n = 4, T = 16, D = 2, d = 6, m = 3;
                     auto enc = std::make_shared<Encoder>(
                         Encoder::init({D, 4, d, 3, {1, 2}, 0.0}, rng));
                     auto disc = std::make_shared<Discriminator>(Discriminator::init(d, 4, rng));
                     auto basis = std::make_shared<InvariantBasis>(InvariantBasis::random(d, m, rng));
                     for (auto& l : enc->layers) {
                       for (double& v : l.bias.mutable_data()) v = rng.normal() * 0.1;
                     }
                     Tensor xs = rng.normal_tensor({n, T, D});
                     Tensor xt = rng.normal_tensor({n, T, D});
                     Tensor xa = rng.normal_tensor({2, T, D});
                     ScalarFunction fn = [=](const std::vector<Tensor>&) {
                       Tensor fs = encode(*enc, xs), ft = encode(*enc, xt);
                       Tensor hs = invariant_features(*basis, fs);
                       Tensor ht = invariant_features(*basis, ft);
                       Tensor hcon = gather_rows(ht, {0, 1});
                       Tensor hdis = gather_rows(ht, {2, 3});
                       Tensor ha = invariant_features(*basis, encode(*enc, xa));
                       LossComponents c{
                           supervised_contrastive_loss(concat({hs, hcon}, 0), {0, 1, 0, 1, 1, 0}, 0.5),
                           self_consistency_loss(hdis, ha, 0.5), anti_divergence_loss(hdis, hs, 0.5),
                           adversarial_loss(*disc, concat({fs, ft}, 0), concat({hs, ht}, 0))};
                       return total_loss(c, 0.5, 0.5).total;
                     };
                     std::vector<Tensor> inputs;
                     for (auto& p : enc->params()) inputs.push_back(p.value);
                     inputs.push_back(basis->B);
                     for (auto& p : disc->params()) inputs.push_back(p.value);
                     return std::make_pair(fn, inputs);
                   }});
  cases.push_back({"cross_entropy", [](Rng& rng) {
                     const std::size_t n = 2 + rng.index(6), c = 2 + rng.index(4);
                     Tensor logits = rng.normal_tensor({n, c}, 2.0, true);
                     const auto labels = detail::random_labels(n, c, rng);
                     ScalarFunction fn = [labels](const std::vector<Tensor>& in) {
                       return cross_entropy(in[0], labels);
                     };
                     return std::make_pair(fn, std::vector<Tensor>{logits});
                   }});
  return cases;
}

struct GradCheckOutcome {
  std::string name;
  double max_error = 0.0;
  std::size_t instances = 0;
};

inline std::vector<GradCheckOutcome> run_gradcheck_suite(const std::vector<GradCheckCase>& cases,
                                                         std::size_t instances,
                                                         std::uint64_t seed, double eps = 1e-5) {
  std::vector<GradCheckOutcome> out;
  Rng rng(seed);
  for (const auto& c : cases) {
    GradCheckOutcome o{c.name, 0.0, instances};
    for (std::size_t i = 0; i < instances; ++i) {
      auto [fn, inputs] = c.make(rng);
      o.max_error = std::max(o.max_error, gradient_check(fn, inputs, eps));
    }
    out.push_back(o);
  }
  return out;
}

}  // namespace darsd
