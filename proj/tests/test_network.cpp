#include "dan/gradcheck.hpp"
#include "dan/network/dan.hpp"
#include "dan/train/loss.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

using namespace dan;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

ModelConfig toy_with(const std::string& plan) {
  ModelConfig c = ModelConfig::toy();
  c.plan = parse_stack(plan);
  return c;
}

std::size_t conv_out(std::size_t t, std::size_t k) { return (t - k) / k + 1; }

}  // namespace

TEST(StackPlan, ValidSpecs) {
  using B = Block;
  EXPECT_EQ(parse_stack("EDR").tokens, (std::vector<B>{B::encode, B::decode, B::merge}));
  EXPECT_EQ(parse_stack("EDEDR").tokens, (std::vector<B>{B::encode, B::decode, B::encode, B::decode, B::merge}));
  EXPECT_EQ(parse_stack("EDEDRR").tokens,
            (std::vector<B>{B::encode, B::decode, B::encode, B::decode, B::merge, B::merge}));
}

TEST(StackPlan, RoundTrip) {
  for (const char* s : {"EDR", "EDRR", "EDEDR", "EDEDRR", "EDEDEDRRR"}) EXPECT_EQ(parse_stack(s).str(), s);
}

TEST(StackPlan, MalformedSpecsReportPosition) {
  const std::vector<std::pair<std::string, std::size_t>> bad{
      {"", 0},     {"DRE", 0},  {"R", 0},    {"ED", 2},   {"EDRE", 3},
      {"EER", 1},  {"EDX", 2},  {"E", 1},    {"EDRD", 3}, {"edr", 0},
  };
  for (const auto& [spec, pos] : bad) {
    try {
      parse_stack(spec);
      ADD_FAILURE() << "accepted '" << spec << "'";
    } catch (const StackGrammarError& e) {
      EXPECT_EQ(e.position(), pos) << spec << ": " << e.what();
    }
  }
}

TEST(Encode, ConvOutputLengths) {
  EXPECT_EQ(conv_out(1440, 11), 130u);
  EXPECT_EQ(conv_out(1440, 3), 480u);
  EXPECT_EQ(conv_out(1440, 7), 205u);
  const ModelConfig c = ModelConfig::toy();
  EXPECT_EQ(conv_out(48, c.kernel_far), 12u);
  EXPECT_EQ(conv_out(48, c.kernel_near), 16u);
  EXPECT_EQ(conv_out(48, c.kernel_indicator), 24u);

  // Full-scale front-end shapes through the actual op.
  Graph g;
  ModelConfig full;
  full.hidden = 2;
  full.conv_channels = 2;
  const ParamMap params = init_params(full, 1);
  ParamBinder P(g, params, false);
  Var x = g.constant(Tensor::zeros({1, 1440}));
  EXPECT_EQ(detail::conv_front(P, "E0.conv_far", x, 11).shape(), (Shape{1, 2, 130}));
  EXPECT_EQ(detail::conv_front(P, "E0.conv_near", x, 3).shape(), (Shape{1, 2, 480}));
  EXPECT_EQ(detail::conv_front(P, "E0.conv_ind", x, 7).shape(), (Shape{1, 2, 205}));
}

TEST(Encode, ZeroParamsGiveZeroStates) {
  const ModelConfig c = ModelConfig::toy();
  const ParamMap params = zero_params(c);
  std::mt19937_64 rng(1);
  Graph g;
  ParamBinder P(g, params, false);
  const auto s = encode(P, c, 0, g.constant(random_tensor({3, 48}, rng)), g.constant(random_tensor({3, 48}, rng)));
  for (const BranchState* b : {&s.far, &s.near, &s.ind}) {
    EXPECT_EQ(b->merged.shape(), (Shape{3, 2 * c.hidden}));
    for (double v : b->merged.value().data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Encode, LengthMismatch) {
  const ModelConfig c = ModelConfig::toy();
  const ParamMap params = zero_params(c);
  Graph g;
  ParamBinder P(g, params, false);
  EXPECT_THROW(encode(P, c, 0, g.constant(Tensor::zeros({1, 47})), g.constant(Tensor::zeros({1, 48}))),
               DimensionError);
  EXPECT_THROW(encode(P, c, 0, g.constant(Tensor::zeros({1, 48})), g.constant(Tensor::zeros({2, 48}))),
               DimensionError);
}

TEST(Decode, ShapesAndZeroParams) {
  const ModelConfig c = ModelConfig::toy();
  const ParamMap params = zero_params(c);
  Graph g;
  ParamBinder P(g, params, false);
  Var x = g.constant(Tensor::zeros({2, 48}));
  const auto s = encode(P, c, 0, x, x);
  Var last = g.constant(Tensor({2, 1}, {0.7, -0.3}));
  const auto out = decode(P, c, 0, s, last, last, std::nullopt);
  EXPECT_EQ(out.y_f.shape(), (Shape{2, 12}));
  EXPECT_EQ(out.y_n.shape(), (Shape{2, 12}));
  EXPECT_EQ(out.y_i_raw.shape(), (Shape{2, 12}));
  EXPECT_EQ(out.i_hidden.shape(), (Shape{2, 2 * c.hidden, 12}));
  for (Var v : {out.y_f, out.y_n, out.y_i_raw}) {
    for (double e : v.value().data()) EXPECT_EQ(e, 0.0);
  }
}

TEST(Decode, FullHorizonLength) {
  ModelConfig c;
  c.input_length = 300;
  c.horizon = 288;
  c.hidden = 2;
  c.conv_channels = 1;
  c.plan = parse_stack("EDR");
  const ParamMap params = init_params(c, 2);
  Graph g;
  ParamBinder P(g, params, false);
  Var x = g.constant(Tensor::zeros({1, 300}));
  const auto s = encode(P, c, 0, x, x);
  const auto out = decode(P, c, 0, s, ops::slice_cols(x, 299, 300), ops::slice_cols(x, 299, 300), std::nullopt);
  EXPECT_EQ(out.y_f.value().dim(1), 288u);
  EXPECT_EQ(out.y_n.value().dim(1), 288u);
  EXPECT_EQ(out.y_i_raw.value().dim(1), 288u);
}

TEST(Decode, SingleStepScalarOracle) {
  ModelConfig c = ModelConfig::toy();
  c.hidden = 1;
  c.horizon = 1;
  ParamMap params = zero_params(c);
  // Indicator decoder: input weights per gate (i,f,g,o), recurrent, bias.
  params["D0.dec_ind.w_input"] = Tensor({1, 4}, {0.5, -0.2, 0.8, 0.3});
  params["D0.dec_ind.w_hidden"] = Tensor({1, 4}, {0.1, 0.4, -0.6, 0.2});
  params["D0.dec_ind.bias"] = Tensor({4}, {0.05, 0.1, -0.1, 0.0});
  params["D0.head_ind.weight"] = Tensor({1, 1}, {1.3});
  params["D0.head_ind.bias"] = Tensor({1}, {-0.2});
  params["D0.dec_far.w_input"] = Tensor({2, 4}, {0.2, 0.1, 0.7, -0.4, -0.3, 0.5, 0.2, 0.6});
  params["D0.dec_far.w_hidden"] = Tensor({1, 4}, {0.3, -0.1, 0.4, 0.2});
  params["D0.dec_far.bias"] = Tensor({4}, {0.0, 0.2, 0.1, -0.1});
  params["D0.head_far.weight"] = Tensor({1, 1}, {0.9});
  params["D0.head_far.bias"] = Tensor({1}, {0.4});

  Graph g;
  ParamBinder P(g, params, false);
  EncoderStates s;
  const double hi = 0.3, ci = -0.5, hf = -0.2, cf = 0.6;
  s.ind.merged = g.constant(Tensor({1, 2}, {hi, ci}));
  s.far.merged = g.constant(Tensor({1, 2}, {hf, cf}));
  s.near.merged = g.constant(Tensor({1, 2}, {0.0, 0.0}));
  const double last_x = 0.8, last_i = -1.1;
  const auto out = decode(P, c, 0, s, g.constant(Tensor({1, 1}, {last_x})), g.constant(Tensor({1, 1}, {last_i})),
                          std::nullopt);

  auto cell = [](std::vector<double> z, double c_prev) {
    const double c_new = sigmoid(z[1]) * c_prev + sigmoid(z[0]) * std::tanh(z[2]);
    return std::pair{sigmoid(z[3]) * std::tanh(c_new), c_new};
  };
  std::vector<double> zi(4);
  const double wi[4] = {0.5, -0.2, 0.8, 0.3}, wh[4] = {0.1, 0.4, -0.6, 0.2}, bi[4] = {0.05, 0.1, -0.1, 0.0};
  for (int k = 0; k < 4; ++k) zi[k] = last_i * wi[k] + hi * wh[k] + bi[k];
  const auto [h_ind, c_ind] = cell(zi, ci);
  const double y_i = 1.3 * h_ind - 0.2;
  EXPECT_NEAR(out.y_i_raw.value()[0], y_i, 1e-14);
  EXPECT_NEAR(out.i_hidden.value()[0], h_ind, 1e-14);
  EXPECT_NEAR(out.i_hidden.value()[1], c_ind, 1e-14);

  const double w0[4] = {0.2, 0.1, 0.7, -0.4}, w1[4] = {-0.3, 0.5, 0.2, 0.6};
  const double whf[4] = {0.3, -0.1, 0.4, 0.2}, bf[4] = {0.0, 0.2, 0.1, -0.1};
  std::vector<double> zf(4);
  for (int k = 0; k < 4; ++k) zf[k] = last_x * w0[k] + y_i * w1[k] + hf * whf[k] + bf[k];
  const auto [h_far, c_far] = cell(zf, cf);
  (void)c_far;
  EXPECT_NEAR(out.y_f.value()[0], 0.9 * h_far + 0.4, 1e-14);
  EXPECT_EQ(out.y_n.value()[0], 0.0);
}

TEST(Decode, RepeatedBlockNeedsPreviousIndicator) {
  const ModelConfig c = toy_with("EDEDR");
  const ParamMap params = zero_params(c);
  Graph g;
  ParamBinder P(g, params, false);
  Var x = g.constant(Tensor::zeros({1, 48}));
  const auto s = encode(P, c, 1, x, x);
  Var last = ops::slice_cols(x, 47, 48);
  EXPECT_THROW(decode(P, c, 1, s, last, last, std::nullopt), std::invalid_argument);
  EXPECT_NO_THROW(decode(P, c, 1, s, last, last, g.constant(Tensor::zeros({1, 12}))));
}

TEST(Refine, MatchesBruteForceDoubleConvolution) {
  ModelConfig c = ModelConfig::toy();
  c.hidden = 3;
  std::mt19937_64 rng(4);
  ParamMap params = init_params(c, 9);
  const std::size_t B = 2, W = 2 * c.hidden, h = c.horizon, H = c.hidden;
  const Tensor in = random_tensor({B, W, h}, rng);
  Graph g;
  ParamBinder P(g, params, false);
  const Tensor got = refine_indicator(P, c, 0, g.constant(in)).value();
  ASSERT_EQ(got.shape(), (Shape{B, h}));

  const Tensor& k1 = params.at("D0.refine1.kernel");
  const Tensor& b1 = params.at("D0.refine1.bias");
  const Tensor& k2 = params.at("D0.refine2.kernel");
  const Tensor& b2 = params.at("D0.refine2.bias");
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<std::vector<double>> mid(H, std::vector<double>(h));
    for (std::size_t o = 0; o < H; ++o) {
      for (std::size_t j = 0; j < h; ++j) {
        double s = b1[o];
        for (std::size_t ci = 0; ci < W; ++ci) {
          for (std::size_t k = 0; k < 7; ++k) {
            const long pos = static_cast<long>(j + k) - 3;
            if (pos < 0 || pos >= static_cast<long>(h)) continue;
            s += k1[(o * W + ci) * 7 + k] * in[(b * W + ci) * h + static_cast<std::size_t>(pos)];
          }
        }
        mid[o][j] = std::max(s, 0.0);
      }
    }
    for (std::size_t j = 0; j < h; ++j) {
      double s = b2[0];
      for (std::size_t ci = 0; ci < H; ++ci) {
        for (std::size_t k = 0; k < 3; ++k) {
          const long pos = static_cast<long>(j + k) - 1;
          if (pos < 0 || pos >= static_cast<long>(h)) continue;
          s += k2[ci * 3 + k] * mid[ci][static_cast<std::size_t>(pos)];
        }
      }
      EXPECT_NEAR(got[b * h + j], s, 1e-12);
    }
  }
}

TEST(Refine, ZeroWeightsGiveBias) {
  ModelConfig c = ModelConfig::toy();
  c.horizon = 288;
  c.input_length = 300;
  ParamMap params = zero_params(c);
  params["D0.refine2.bias"] = Tensor({1}, {0.37});
  std::mt19937_64 rng(5);
  Graph g;
  ParamBinder P(g, params, false);
  const Tensor y = refine_indicator(P, c, 0, g.constant(random_tensor({1, 2 * c.hidden, 288}, rng))).value();
  ASSERT_EQ(y.size(), 288u);
  for (double v : y.data()) EXPECT_EQ(v, 0.37);
}

TEST(Refine, WidthMismatch) {
  const ModelConfig c = ModelConfig::toy();
  const ParamMap params = zero_params(c);
  Graph g;
  ParamBinder P(g, params, false);
  EXPECT_THROW(refine_indicator(P, c, 0, g.constant(Tensor::zeros({1, c.hidden, 12}))), DimensionError);
}

TEST(Gates, ClosedFormAndComplement) {
  Graph g;
  const auto z = gate_vectors(g.constant(Tensor({1, 1}, {0.0})), 4.0);
  EXPECT_EQ(z.m_far.value()[0], 0.5);
  EXPECT_EQ(z.m_near.value()[0], 0.5);
  const auto one = gate_vectors(g.constant(Tensor({1, 1}, {1.0})), 4.0);
  EXPECT_NEAR(one.m_far.value()[0], 0.9820, 5e-5);
  EXPECT_NEAR(one.m_far.value()[0], sigmoid(4.0), 1e-15);

  std::mt19937_64 rng(6);
  Tensor y({1, 400});
  std::normal_distribution<double> nd(0.0, 3.0);
  for (double& v : y.data()) v = nd(rng);
  const auto r = gate_vectors(g.constant(y), 4.0);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(r.m_far.value()[i] + r.m_near.value()[i], 1.0);
  EXPECT_THROW(gate_vectors(g.constant(y), 0.0), std::invalid_argument);
}

TEST(Gates, Monotone) {
  Graph g;
  Tensor y({1, 201});
  for (std::size_t i = 0; i < 201; ++i) y[i] = -2.0 + 0.02 * static_cast<double>(i);
  const auto r = gate_vectors(g.constant(y), 4.0);
  for (std::size_t i = 1; i < 201; ++i) EXPECT_GT(r.m_far.value()[i], r.m_far.value()[i - 1]);
}

TEST(RepMerg, ZeroParams) {
  const ModelConfig c = ModelConfig::toy();
  ParamMap params = zero_params(c);
  params["R0.head_out.bias"] = Tensor({1}, {0.25});
  std::mt19937_64 rng(7);
  Graph g;
  ParamBinder P(g, params, false);
  const Tensor yf = random_tensor({2, 12}, rng), yn = random_tensor({2, 12}, rng), yi = random_tensor({2, 12}, rng);
  const auto m = repmerg(P, c, 0, g.constant(yf), g.constant(yn), g.constant(yi),
                         g.constant(random_tensor({2, 2 * c.hidden}, rng)), std::nullopt);
  for (double v : m.y_hat.value().data()) EXPECT_EQ(v, 0.25);
  EXPECT_EQ(m.y_f.value(), yf);
  EXPECT_EQ(m.y_n.value(), yn);
}

TEST(RepMerg, SingleStepScalarOracle) {
  ModelConfig c = ModelConfig::toy();
  c.hidden = 1;
  c.horizon = 1;
  ParamMap params = zero_params(c);
  params["R0.lstm.w_input"] = Tensor({1, 4}, {0.4, -0.7, 0.9, 0.1});
  params["R0.lstm.w_hidden"] = Tensor({1, 4}, {-0.2, 0.3, 0.5, 0.6});
  params["R0.lstm.bias"] = Tensor({4}, {0.1, 0.0, -0.3, 0.2});
  params["R0.head_z.weight"] = Tensor({1, 1}, {1.5});
  params["R0.head_z.bias"] = Tensor({1}, {-0.1});
  params["R0.head_out.weight"] = Tensor({2, 1}, {0.8, 0.35});
  params["R0.head_out.bias"] = Tensor({1}, {0.05});
  params["R0.res_far.weight"] = Tensor({1, 1}, {0.6});
  params["R0.res_far.bias"] = Tensor({1}, {0.01});
  params["R0.res_near.weight"] = Tensor({1, 1}, {-0.4});
  params["R0.res_near.bias"] = Tensor({1}, {0.02});
  const double yf = 1.2, yn = -0.4, yi = 0.7, h0 = 0.25, c0 = -0.35;
  Graph g;
  ParamBinder P(g, params, false);
  const auto m = repmerg(P, c, 0, g.constant(Tensor({1, 1}, {yf})), g.constant(Tensor({1, 1}, {yn})),
                         g.constant(Tensor({1, 1}, {yi})), g.constant(Tensor({1, 2}, {h0, c0})), std::nullopt);
  const double wi[4] = {0.4, -0.7, 0.9, 0.1}, wh[4] = {-0.2, 0.3, 0.5, 0.6}, b[4] = {0.1, 0.0, -0.3, 0.2};
  double z[4];
  for (int k = 0; k < 4; ++k) z[k] = yi * wi[k] + h0 * wh[k] + b[k];
  const double c1 = sigmoid(z[1]) * c0 + sigmoid(z[0]) * std::tanh(z[2]);
  const double h1 = sigmoid(z[3]) * std::tanh(c1);
  const double zz = 1.5 * h1 - 0.1;
  EXPECT_NEAR(m.y_hat.value()[0], 0.8 * zz + 0.35 * yn + 0.05, 1e-14);
  EXPECT_NEAR(m.y_f.value()[0], yf + 0.6 * h1 + 0.01, 1e-14);
  EXPECT_NEAR(m.y_n.value()[0], yn - 0.4 * h1 + 0.02, 1e-14);
}

TEST(RepMerg, ZeroSecondBlockIsIdentity) {
  const ModelConfig one = toy_with("EDR");
  const ModelConfig two = toy_with("EDRR");
  const ParamMap p1 = init_params(one, 11);
  ParamMap p2 = zero_params(two);
  for (const auto& [name, t] : p1) p2[name] = t;
  std::mt19937_64 rng(8);
  const auto x = random_vector(48, rng), ind = random_vector(48, rng);
  const auto a = forward(one, p1, x, ind);
  const auto b = forward(two, p2, x, ind);
  EXPECT_EQ(a.y_hat, b.y_hat);
  EXPECT_EQ(a.y_f, b.y_f);
  EXPECT_EQ(a.y_n, b.y_n);
}

TEST(RepMerg, LengthMismatch) {
  const ModelConfig c = ModelConfig::toy();
  const ParamMap params = zero_params(c);
  Graph g;
  ParamBinder P(g, params, false);
  Var ok = g.constant(Tensor::zeros({1, 12}));
  Var bad = g.constant(Tensor::zeros({1, 11}));
  Var h = g.constant(Tensor::zeros({1, 2 * c.hidden}));
  EXPECT_THROW(repmerg(P, c, 0, ok, bad, ok, h, std::nullopt), DimensionError);
  EXPECT_THROW(repmerg(P, c, 0, ok, ok, bad, h, std::nullopt), DimensionError);
}

TEST(Forward, ToySmoke) {
  const ModelConfig c = ModelConfig::toy();
  const ParamMap params = init_params(c, 3);
  std::mt19937_64 rng(9);
  const auto b = forward(c, params, random_vector(48, rng), random_vector(48, rng));
  for (const auto* v : {&b.y_f, &b.y_n, &b.y_i, &b.y_w, &b.y_hat, &b.m_far, &b.m_near}) EXPECT_EQ(v->size(), 12u);
  EXPECT_EQ(b.h_far.size(), c.hidden);
}

TEST(Forward, ZeroParamsConstantOutput) {
  for (const char* plan : {"EDR", "EDEDRR"}) {
    const ModelConfig c = toy_with(plan);
    ParamMap params = zero_params(c);
    const std::string last_r = std::string("R") + std::to_string(c.plan.count(Block::merge) - 1);
    params[last_r + ".head_out.bias"] = Tensor({1}, {-0.6});
    std::mt19937_64 rng(10);
    const auto b = forward(c, params, random_vector(48, rng), random_vector(48, rng));
    for (double v : b.y_hat) EXPECT_EQ(v, -0.6) << plan;
  }
}

TEST(Forward, YwReconstruction) {
  const ModelConfig c = toy_with("EDEDRR");
  const ParamMap params = init_params(c, 4);
  std::mt19937_64 rng(11);
  const auto b = forward(c, params, random_vector(48, rng), random_vector(48, rng));
  for (std::size_t j = 0; j < 12; ++j) {
    EXPECT_NEAR(b.y_w[j], b.m_far[j] * b.y_f[j] + (1.0 - b.m_far[j]) * b.y_n[j], 1e-12);
    EXPECT_EQ(b.m_far[j] + b.m_near[j], 1.0);
  }
}

TEST(Forward, Deterministic) {
  const ModelConfig c = toy_with("EDEDRR");
  const ParamMap params = init_params(c, 5);
  std::mt19937_64 rng(12);
  const auto x = random_vector(48, rng), ind = random_vector(48, rng);
  const auto a = forward(c, params, x, ind);
  const auto b = forward(c, params, x, ind);
  EXPECT_EQ(a.y_hat, b.y_hat);
  EXPECT_EQ(a.y_i, b.y_i);
}

TEST(Forward, BatchMatchesSingle) {
  const ModelConfig c = ModelConfig::toy();
  const ParamMap params = init_params(c, 6);
  std::mt19937_64 rng(13);
  std::vector<std::vector<double>> xs, is;
  for (int i = 0; i < 3; ++i) {
    xs.push_back(random_vector(48, rng));
    is.push_back(random_vector(48, rng));
  }
  const auto batch = forward_batch(c, params, xs, is);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto one = forward(c, params, xs[i], is[i]);
    for (std::size_t j = 0; j < 12; ++j) EXPECT_NEAR(batch[i].y_hat[j], one.y_hat[j], 1e-13);
  }
}

TEST(Forward, EdedrrEqualsManualComposition) {
  const ModelConfig c = toy_with("EDEDRR");
  const ParamMap params = init_params(c, 7);
  std::mt19937_64 rng(14);
  const auto xv = random_vector(48, rng), iv = random_vector(48, rng);
  const auto bundle = forward(c, params, xv, iv);

  Graph g;
  ParamBinder P(g, params, false);
  Var x = g.constant(Tensor({1, 48}, xv));
  Var ind = g.constant(Tensor({1, 48}, iv));
  Var lx = ops::slice_cols(x, 47, 48), li = ops::slice_cols(ind, 47, 48);
  const auto s0 = encode(P, c, 0, x, ind);
  const auto d0 = decode(P, c, 0, s0, lx, li, std::nullopt);
  Var yi0 = refine_indicator(P, c, 0, d0.i_hidden);
  const auto s1 = encode(P, c, 1, x, ind);
  const auto d1 = decode(P, c, 1, s1, lx, li, yi0);
  Var yi1 = refine_indicator(P, c, 1, d1.i_hidden);
  const auto r0 = repmerg(P, c, 0, d1.y_f, d1.y_n, yi1, s1.far.merged, std::nullopt);
  const auto r1 = repmerg(P, c, 1, r0.y_f, r0.y_n, yi1, s1.far.merged, r0.y_hat);
  const auto gates = gate_vectors(yi1, c.alpha);
  for (std::size_t j = 0; j < 12; ++j) {
    EXPECT_EQ(bundle.y_hat[j], r1.y_hat.value()[j]);
    EXPECT_EQ(bundle.y_f[j], r1.y_f.value()[j]);
    EXPECT_EQ(bundle.y_n[j], r1.y_n.value()[j]);
    EXPECT_EQ(bundle.y_i[j], yi1.value()[j]);
    EXPECT_EQ(bundle.m_far[j], gates.m_far.value()[j]);
  }
}

TEST(Forward, EndToEndGradientCheck) {
  ModelConfig c = toy_with("EDEDRR");
  c.hidden = 3;
  c.conv_channels = 2;
  c.input_length = 12;
  c.horizon = 4;
  c.kernel_far = 4;
  c.kernel_indicator = 2;
  c.kernel_near = 3;
  const ParamMap params = init_params(c, 8);
  std::vector<std::string> names;
  std::vector<Tensor> leaves;
  for (const auto& [name, t] : params) {
    names.push_back(name);
    leaves.push_back(t);
  }
  std::mt19937_64 rng(15);
  const Tensor x = random_tensor({2, 12}, rng), ind = random_tensor({2, 12}, rng), y = random_tensor({2, 4}, rng);
  Tensor yi({2, 4});
  for (std::size_t b = 0; b < 2; ++b) {
    const auto d = first_order_target(std::span<const double>(y.data()).subspan(b * 4, 4), x[b * 12 + 11]);
    for (std::size_t j = 0; j < 4; ++j) yi[b * 4 + j] = d[j];
  }
  const LossBuilder build = [&](Graph& g, std::span<const Var> v) {
    ParamBinder P(g, params, false);
    for (std::size_t i = 0; i < names.size(); ++i) P.bind(names[i], v[i]);
    const BundleVars bv = forward(P, c, g.constant(x), g.constant(ind));
    return multi_loss(g, bv, y, yi, 0.7).total;
  };
  const auto r = finite_difference_check(build, leaves, {.max_coords_per_leaf = 4, .seed = 3});
  EXPECT_TRUE(r.passed) << r.max_relative_error;
  EXPECT_GT(r.coords_checked, 100u);
}
