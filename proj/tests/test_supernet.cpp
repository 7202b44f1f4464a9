#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ltnas/imbalance.hpp"
#include "ltnas/rng.hpp"
#include "ltnas/space.hpp"
#include "ltnas/supernet.hpp"
#include "ltnas/tensor.hpp"

using namespace ltnas;
using namespace ltnas::space;
using namespace ltnas::supernet;
using imbalance::LabeledDataset;
using imbalance::ReweightPolicy;

namespace {

SearchSpace small_space(int nodes = 3, int classes = 3,
                        std::vector<std::string> ops = {
                            "zero", "skip-connect", "separable-conv-3x3",
                            "separable-conv-5x5", "avg-pool-3x3",
                            "max-pool-3x3"}) {
  SpaceConfig cfg;
  cfg.num_cells = 1;
  cfg.nodes_per_cell = nodes;
  cfg.candidate_ops = std::move(ops);
  cfg.channel_width = 4;
  cfg.num_classes = classes;
  cfg.input_channels = 1;
  cfg.input_height = 4;
  cfg.input_width = 4;
  return build_search_space(cfg);
}

Batch random_batch(const SearchSpace& s, int n, Rng& rng) {
  Batch b(n, s.input_channels, s.input_height, s.input_width);
  for (auto& x : b.v) x = rng.uniform(-1.0, 1.0);
  return b;
}

LabeledDataset make_dataset(const SearchSpace& s, int per_class, Rng& rng) {
  LabeledDataset d;
  d.num_classes = s.num_classes;
  d.channels = s.input_channels;
  d.height = s.input_height;
  d.width = s.input_width;
  for (int c = 0; c < s.num_classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      d.labels.push_back(c);
      for (int k = 0; k < d.feature_dims(); ++k)
        d.features.push_back(rng.uniform(-1.0, 1.0) + 0.5 * c);
    }
  return d;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  REQUIRE(a.rows == b.rows);
  REQUIRE(a.cols == b.cols);
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i)
    m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

std::vector<double> flatten_params(const SuperNetwork& net) {
  std::vector<double> out(net.stem_w);
  out.insert(out.end(), net.stem_b.begin(), net.stem_b.end());
  for (const auto& edge : net.edge_ops)
    for (const auto& op : edge) {
      out.insert(out.end(), op.dw.begin(), op.dw.end());
      out.insert(out.end(), op.pw.begin(), op.pw.end());
      out.insert(out.end(), op.norm.gamma.begin(), op.norm.gamma.end());
      out.insert(out.end(), op.norm.beta.begin(), op.norm.beta.end());
      out.insert(out.end(), op.norm.mean.begin(), op.norm.mean.end());
      out.insert(out.end(), op.norm.var.begin(), op.norm.var.end());
    }
  out.insert(out.end(), net.cls_w.begin(), net.cls_w.end());
  out.insert(out.end(), net.cls_b.begin(), net.cls_b.end());
  return out;
}

std::vector<double> flatten_params(const Subnet& sub) {
  std::vector<double> out(sub.stem_w);
  out.insert(out.end(), sub.stem_b.begin(), sub.stem_b.end());
  for (const auto& op : sub.ops) {
    out.insert(out.end(), op.dw.begin(), op.dw.end());
    out.insert(out.end(), op.pw.begin(), op.pw.end());
    out.insert(out.end(), op.norm.gamma.begin(), op.norm.gamma.end());
    out.insert(out.end(), op.norm.beta.begin(), op.norm.beta.end());
    out.insert(out.end(), op.norm.mean.begin(), op.norm.mean.end());
    out.insert(out.end(), op.norm.var.begin(), op.norm.var.end());
  }
  out.insert(out.end(), sub.cls_w.begin(), sub.cls_w.end());
  out.insert(out.end(), sub.cls_b.begin(), sub.cls_b.end());
  return out;
}

}  // namespace

TEST_CASE("default schedules carry the documented settings") {
  auto sup = default_supernet_schedule();
  CHECK(sup.epochs == 500);
  CHECK(sup.initial_lr == 0.1);
  CHECK(sup.milestones == std::vector<int>{300, 400});

  auto sub = default_subnet_schedule();
  CHECK(sub.epochs == 200);
  CHECK(sub.initial_lr == 0.1);
  CHECK(sub.milestones == std::vector<int>{160, 180});
  CHECK(sub.decay_factor == 0.01);
  CHECK(sub.momentum == 0.9);
  CHECK(sub.weight_decay == 5e-4);
  CHECK(sub.batch_size == 128);

  auto ad = default_adaptation_schedule();
  CHECK(ad.epochs == 200);
  CHECK(ad.initial_lr == 0.01);
  CHECK(ad.milestones == std::vector<int>{100});
  CHECK(ad.initial_lr < sup.initial_lr);
}

TEST_CASE("lr_at_epoch follows the milestone decay") {
  TrainSchedule s = default_subnet_schedule();
  CHECK(lr_at_epoch(s, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(lr_at_epoch(s, 159) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(lr_at_epoch(s, 160) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(lr_at_epoch(s, 179) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(lr_at_epoch(s, 180) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(lr_at_epoch(s, 199) == doctest::Approx(1e-5).epsilon(1e-12));

  CHECK_THROWS_AS(lr_at_epoch(s, 200), std::out_of_range);
  CHECK_THROWS_AS(lr_at_epoch(s, -1), std::out_of_range);

  TrainSchedule flat;
  flat.epochs = 10;
  flat.initial_lr = 0.05;
  for (int e = 0; e < 10; ++e) CHECK(lr_at_epoch(flat, e) == 0.05);

  for (int e = 1; e < s.epochs; ++e)
    CHECK(lr_at_epoch(s, e) <= lr_at_epoch(s, e - 1));
}

TEST_CASE("schedule validation") {
  TrainSchedule s;
  s.epochs = 10;
  s.milestones = {12};
  CHECK_THROWS_AS(lr_at_epoch(s, 0), std::invalid_argument);
  s.milestones = {5, 5};
  CHECK_THROWS_AS(lr_at_epoch(s, 0), std::invalid_argument);
  s.milestones = {5};
  s.initial_lr = 0.0;
  CHECK_THROWS_AS(lr_at_epoch(s, 0), std::invalid_argument);
}

TEST_CASE("schedule fingerprint separates distinct schedules") {
  auto a = default_subnet_schedule();
  auto b = a;
  CHECK(schedule_fingerprint(a) == schedule_fingerprint(b));
  b.initial_lr = 0.05;
  CHECK(schedule_fingerprint(a) != schedule_fingerprint(b));
  b = a;
  b.milestones = {160};
  CHECK(schedule_fingerprint(a) != schedule_fingerprint(b));
}

TEST_CASE("init_supernet is seed-deterministic") {
  auto s = small_space();
  Rng a(123), b(123), c(124);
  auto n1 = init_supernet(s, a);
  auto n2 = init_supernet(s, b);
  auto n3 = init_supernet(s, c);
  CHECK(flatten_params(n1) == flatten_params(n2));
  CHECK(flatten_params(n1) != flatten_params(n3));
  CHECK(n1.epoch_counter == 0);
}

TEST_CASE("zero input with zero classifier bias gives uniform logits") {
  auto s = small_space();
  Rng rng(9);
  auto net = init_supernet(s, rng);
  for (double b : net.cls_b) CHECK(b == 0.0);

  Batch zeros(2, s.input_channels, s.input_height, s.input_width);
  Genotype all_zero{std::vector<int>(s.num_edges(), 0)};
  auto logits = forward_with_path(net, all_zero, zeros);
  for (double v : logits.v) CHECK(v == 0.0);
}

TEST_CASE("all-zero genotype broadcasts the classifier bias") {
  auto s = small_space();
  Rng rng(10);
  auto net = init_supernet(s, rng);
  for (auto& b : net.cls_b) b = rng.uniform(-1, 1);

  Batch input = random_batch(s, 3, rng);
  Genotype all_zero{std::vector<int>(s.num_edges(), 0)};
  auto logits = forward_with_path(net, all_zero, input);
  for (int r = 0; r < logits.rows; ++r)
    for (int c = 0; c < logits.cols; ++c)
      CHECK(logits.at(r, c) == doctest::Approx(net.cls_b[c]).epsilon(1e-12));
}

TEST_CASE("all-skip genotype on a two-node cell is classifier(stem(x))") {
  auto s = small_space(2);
  REQUIRE(s.num_edges() == 1);
  Rng rng(11);
  auto net = init_supernet(s, rng);
  Batch input = random_batch(s, 2, rng);

  Genotype skip{{1}};
  auto logits = forward_with_path(net, skip, input);

  const int W = s.channel_width;
  const size_t plane = input.plane();
  for (int i = 0; i < input.n; ++i) {
    // stem: 1x1 conv + bias, then global average pool
    std::vector<double> pooled(W, 0.0);
    for (int co = 0; co < W; ++co) {
      double acc = 0.0;
      for (int ci = 0; ci < s.input_channels; ++ci) {
        const double* px = input.at(i, ci);
        double wij = net.stem_w[co * s.input_channels + ci];
        for (size_t p = 0; p < plane; ++p) acc += wij * px[p];
      }
      pooled[co] =
          acc / static_cast<double>(plane) + net.stem_b[co];
    }
    for (int c = 0; c < s.num_classes; ++c) {
      double expect = net.cls_b[c];
      for (int k = 0; k < W; ++k) expect += net.cls_w[c * W + k] * pooled[k];
      CHECK(logits.at(i, c) == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("path forward rejects genotypes from another space") {
  auto s = small_space();
  Rng rng(12);
  auto net = init_supernet(s, rng);
  Batch input = random_batch(s, 1, rng);
  Genotype bad{std::vector<int>(s.num_edges() + 1, 0)};
  CHECK_THROWS_AS(forward_with_path(net, bad, input), std::invalid_argument);
  Genotype oob{std::vector<int>(s.num_edges(), s.num_ops())};
  CHECK_THROWS_AS(forward_with_path(net, oob, input), std::out_of_range);
}

TEST_CASE("weight sharing: path forward equals extracted subnet forward") {
  auto s = small_space();
  Rng rng(13);
  auto net = init_supernet(s, rng);
  // make running stats non-trivial so the norm layers matter
  auto data = make_dataset(s, 8, rng);
  ReweightPolicy policy;
  policy.drw_epoch = 1000;
  TrainSchedule sched;
  sched.epochs = 2;
  sched.initial_lr = 0.05;
  sched.batch_size = 8;
  Rng train_rng(14);
  train_supernet(net, data, sched, policy, train_rng);

  Rng grng(15);
  Batch input = random_batch(s, 4, rng);
  for (int i = 0; i < 100; ++i) {
    auto g = random_genotype(s, grng);
    auto from_path = forward_with_path(net, g, input);
    auto sub = extract_subnet(net, g);
    auto from_sub = forward_subnet(sub, input);
    CAPTURE(encode_genotype(g));
    CHECK(max_abs_diff(from_path, from_sub) < 1e-6);
  }
}

TEST_CASE("mixture forward saturates to the argmax path") {
  auto s = small_space();
  Rng rng(16);
  auto net = init_supernet(s, rng);
  Batch input = random_batch(s, 3, rng);
  Rng grng(17);
  for (int trial = 0; trial < 5; ++trial) {
    auto g = random_genotype(s, grng);
    MixtureParams mix;
    mix.num_edges = s.num_edges();
    mix.num_ops = s.num_ops();
    mix.alpha.assign(static_cast<size_t>(mix.num_edges) * mix.num_ops, -20.0);
    for (int e = 0; e < mix.num_edges; ++e) mix.row(e)[g.ops[e]] = 20.0;

    auto soft = forward_with_mixture(net, mix, input);
    auto hard = forward_with_path(net, g, input);
    CHECK(max_abs_diff(soft, hard) < 1e-3);
  }
}

TEST_CASE("mixture over two identical op blocks equals the single path") {
  SearchSpace s = small_space(3, 3, {"separable-conv-3x3"});
  // duplicate the only candidate so both slots share one parameterization
  s.candidate_ops.push_back(OpKind::sep_conv_3x3);
  Rng rng(18);
  auto net = init_supernet(s, rng);
  for (auto& edge : net.edge_ops) {
    REQUIRE(edge.size() == 2);
    edge[1] = edge[0];
  }
  Batch input = random_batch(s, 2, rng);
  MixtureParams mix;
  mix.num_edges = s.num_edges();
  mix.num_ops = 2;
  mix.alpha.assign(static_cast<size_t>(mix.num_edges) * 2, 0.0);

  auto soft = forward_with_mixture(net, mix, input);
  auto hard = forward_with_path(net, Genotype{{0, 0, 0}}, input);
  CHECK(max_abs_diff(soft, hard) < 1e-12);
}

TEST_CASE("mixture forward is continuous in alpha") {
  auto s = small_space();
  Rng rng(19);
  auto net = init_supernet(s, rng);
  Batch input = random_batch(s, 2, rng);
  auto mix = uniform_mixture(s);
  for (auto& a : mix.alpha) a = rng.uniform(-1, 1);
  auto base = forward_with_mixture(net, mix, input);

  auto bumped = mix;
  for (auto& a : bumped.alpha) a += 1e-6;
  auto out = forward_with_mixture(net, bumped, input);
  CHECK(max_abs_diff(base, out) < 1e-4);

  auto nan_mix = mix;
  nan_mix.alpha[0] = std::nan("");
  CHECK_THROWS_AS(forward_with_mixture(net, nan_mix, input),
                  std::domain_error);
}

TEST_CASE("training for zero epochs changes nothing") {
  auto s = small_space();
  Rng rng(20);
  auto net = init_supernet(s, rng);
  auto before = flatten_params(net);
  auto data = make_dataset(s, 4, rng);
  TrainSchedule sched;
  sched.epochs = 0;
  Rng train_rng(21);
  ReweightPolicy policy;
  auto log = train_supernet(net, data, sched, policy, train_rng);
  CHECK(log.epochs.empty());
  CHECK(log.updated_elements == 0);
  CHECK(flatten_params(net) == before);
}

TEST_CASE("training rejects an empty dataset") {
  auto s = small_space();
  Rng rng(22);
  auto net = init_supernet(s, rng);
  LabeledDataset empty;
  empty.num_classes = s.num_classes;
  empty.channels = s.input_channels;
  empty.height = s.input_height;
  empty.width = s.input_width;
  TrainSchedule sched;
  sched.epochs = 1;
  Rng train_rng(23);
  ReweightPolicy policy;
  CHECK_THROWS_AS(train_supernet(net, empty, sched, policy, train_rng),
                  std::invalid_argument);
}

TEST_CASE("single-op supernet training follows the subnet trajectory") {
  auto s = small_space(3, 3, {"separable-conv-3x3"});
  Rng net_rng_a(31), net_rng_b(31);
  auto net = init_supernet(s, net_rng_a);
  Genotype g{std::vector<int>(s.num_edges(), 0)};
  auto sub = init_subnet(s, g, net_rng_b);
  CHECK(flatten_params(net) == flatten_params(sub));

  Rng data_rng(32);
  auto data = make_dataset(s, 6, data_rng);
  TrainSchedule sched;
  sched.epochs = 3;
  sched.initial_lr = 0.05;
  sched.batch_size = 4;
  ReweightPolicy policy;
  policy.drw_epoch = 2;

  Rng ta(33), tb(33);
  auto log_a = train_supernet(net, data, sched, policy, ta);
  auto log_b = train_subnet(sub, data, sched, policy, tb);

  REQUIRE(log_a.epochs.size() == log_b.epochs.size());
  for (size_t e = 0; e < log_a.epochs.size(); ++e) {
    CHECK(log_a.epochs[e].loss == log_b.epochs[e].loss);
    CHECK(log_a.epochs[e].lr == log_b.epochs[e].lr);
  }
  CHECK(log_a.updated_elements == log_b.updated_elements);
  auto extracted = extract_subnet(net, g);
  CHECK(flatten_params(extracted) == flatten_params(sub));
}

TEST_CASE("subnet training drives a separable toy problem below chance") {
  auto s = small_space(3, 2, {"skip-connect", "separable-conv-3x3"});
  Rng rng(41);
  // two well separated clusters
  LabeledDataset data;
  data.num_classes = 2;
  data.channels = s.input_channels;
  data.height = s.input_height;
  data.width = s.input_width;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 16; ++i) {
      data.labels.push_back(c);
      for (int k = 0; k < data.feature_dims(); ++k)
        data.features.push_back((c == 0 ? -1.0 : 1.0) +
                                0.1 * rng.uniform(-1, 1));
    }
  Genotype g{{1, 1, 1}};
  Rng init_rng(42);
  auto sub = init_subnet(s, g, init_rng);
  TrainSchedule sched;
  sched.epochs = 20;
  sched.initial_lr = 0.05;
  sched.batch_size = 8;
  sched.weight_decay = 0.0;
  ReweightPolicy policy;
  policy.drw_epoch = 1000;
  Rng train_rng(43);
  auto log = train_subnet(sub, data, sched, policy, train_rng);
  REQUIRE(log.epochs.size() == 20);
  CHECK(log.epochs.back().loss < std::log(2.0));
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
  auto s = small_space();
  Rng ra(51), rb(51);
  auto na = init_supernet(s, ra);
  auto nb = init_supernet(s, rb);
  Rng da(52), db(52);
  auto data_a = make_dataset(s, 5, da);
  auto data_b = make_dataset(s, 5, db);
  TrainSchedule sched;
  sched.epochs = 3;
  sched.batch_size = 4;
  ReweightPolicy policy;
  policy.drw_epoch = 1;
  Rng ta(53), tb(53);
  auto la = train_supernet(na, data_a, sched, policy, ta);
  auto lb = train_supernet(nb, data_b, sched, policy, tb);
  for (size_t e = 0; e < la.epochs.size(); ++e)
    CHECK(la.epochs[e].loss == lb.epochs[e].loss);
  CHECK(save_checkpoint(na) == save_checkpoint(nb));
}

TEST_CASE("subnet update count equals steps times trainable parameters") {
  auto s = small_space();
  Rng rng(61);
  Genotype g{{2, 3, 1}};
  auto sub = init_subnet(s, g, rng);
  auto data = make_dataset(s, 4, rng);  // 12 examples
  TrainSchedule sched;
  sched.epochs = 2;
  sched.batch_size = 5;  // 3 batches per epoch
  ReweightPolicy policy;
  Rng train_rng(62);
  auto log = train_subnet(sub, data, sched, policy, train_rng);
  CHECK(log.updated_elements ==
        2ULL * 3ULL * trainable_param_count(sub));
}

TEST_CASE("recalibration is idempotent and touches only statistics") {
  auto s = small_space();
  Rng rng(71);
  auto net = init_supernet(s, rng);
  auto calib = make_dataset(s, 6, rng);
  Genotype g{{2, 4, 5}};

  auto before = save_checkpoint(net);
  recalibrate_norm_stats(net, g, calib);
  auto once = save_checkpoint(net);
  CHECK(once != before);  // stats moved
  recalibrate_norm_stats(net, g, calib);
  auto twice = save_checkpoint(net);
  CHECK(once == twice);

  // trainable parameters are untouched
  auto reference = load_checkpoint(before);
  CHECK(net.stem_w == reference.stem_w);
  CHECK(net.cls_w == reference.cls_w);
  for (size_t e = 0; e < net.edge_ops.size(); ++e)
    for (size_t o = 0; o < net.edge_ops[e].size(); ++o) {
      CHECK(net.edge_ops[e][o].dw == reference.edge_ops[e][o].dw);
      CHECK(net.edge_ops[e][o].pw == reference.edge_ops[e][o].pw);
      CHECK(net.edge_ops[e][o].norm.gamma ==
            reference.edge_ops[e][o].norm.gamma);
      CHECK(net.edge_ops[e][o].norm.beta ==
            reference.edge_ops[e][o].norm.beta);
    }

  LabeledDataset empty;
  empty.num_classes = s.num_classes;
  empty.channels = s.input_channels;
  empty.height = s.input_height;
  empty.width = s.input_width;
  CHECK_THROWS_AS(recalibrate_norm_stats(net, g, empty),
                  std::invalid_argument);
}

TEST_CASE("supernet recalibration matches the extracted subnet's") {
  auto s = small_space();
  Rng rng(72);
  auto net = init_supernet(s, rng);
  auto calib = make_dataset(s, 6, rng);
  Genotype g{{3, 2, 4}};

  auto sub = extract_subnet(net, g);
  recalibrate_norm_stats(net, g, calib);
  recalibrate_norm_stats(sub, calib);

  auto extracted_after = extract_subnet(net, g);
  for (size_t e = 0; e < sub.ops.size(); ++e) {
    for (size_t i = 0; i < sub.ops[e].norm.mean.size(); ++i) {
      CHECK(std::abs(sub.ops[e].norm.mean[i] -
                     extracted_after.ops[e].norm.mean[i]) < 1e-6);
      CHECK(std::abs(sub.ops[e].norm.var[i] -
                     extracted_after.ops[e].norm.var[i]) < 1e-6);
    }
  }

  Batch input = random_batch(s, 3, rng);
  CHECK(max_abs_diff(forward_with_path(net, g, input),
                     forward_subnet(sub, input)) < 1e-6);
}

TEST_CASE("extraction copies a strict parameter subset") {
  auto s = small_space();
  Rng rng(81);
  auto net = init_supernet(s, rng);
  Rng grng(82);
  auto g = random_genotype(s, grng);
  auto sub = extract_subnet(net, g);
  CHECK(trainable_param_count(sub) < trainable_param_count(net));
  CHECK(sub.genotype == g);
  CHECK(sub.space.same_as(net.space));
}

TEST_CASE("supernet checkpoints round trip bit-exactly") {
  auto s = small_space();
  Rng rng(91);
  auto net = init_supernet(s, rng);
  auto data = make_dataset(s, 4, rng);
  TrainSchedule sched;
  sched.epochs = 2;
  sched.batch_size = 6;
  ReweightPolicy policy;
  Rng train_rng(92);
  train_supernet(net, data, sched, policy, train_rng);

  auto bytes = save_checkpoint(net);
  auto loaded = load_checkpoint(bytes);
  CHECK(loaded.epoch_counter == net.epoch_counter);
  CHECK(loaded.rng_seed == net.rng_seed);
  CHECK(loaded.schedule_fp == net.schedule_fp);
  CHECK(loaded.space.same_as(net.space));
  CHECK(flatten_params(loaded) == flatten_params(net));

  Batch input = random_batch(s, 3, rng);
  Genotype g{{1, 2, 3}};
  auto a = forward_with_path(net, g, input);
  auto b = forward_with_path(loaded, g, input);
  CHECK(a.v == b.v);

  // saving the load gives back the same bytes
  CHECK(save_checkpoint(loaded) == bytes);
}

TEST_CASE("subnet checkpoints round trip through files") {
  auto s = small_space();
  Rng rng(93);
  Genotype g{{0, 5, 2}};
  auto sub = init_subnet(s, g, rng);
  auto bytes = save_subnet(sub);
  auto path = std::string("/tmp/ltnas_test_subnet.ckpt");
  write_file(path, bytes);
  auto back = read_file(path);
  CHECK(back == bytes);
  auto loaded = load_subnet(back);
  CHECK(loaded.genotype == g);
  CHECK(flatten_params(loaded) == flatten_params(sub));
}

TEST_CASE("checkpoint loading validates header, kind, and size") {
  auto s = small_space();
  Rng rng(94);
  auto net = init_supernet(s, rng);
  auto bytes = save_checkpoint(net);

  auto corrupted = bytes;
  corrupted[10] ^= 0x40;
  CHECK_THROWS_AS(load_checkpoint(corrupted), std::runtime_error);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 7);
  CHECK_THROWS_AS(load_checkpoint(truncated), std::runtime_error);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(load_checkpoint(trailing), std::runtime_error);

  // a subnet file is not a supernet file
  Genotype g{{0, 0, 0}};
  auto sub_bytes = save_subnet(init_subnet(s, g, rng));
  CHECK_THROWS_AS(load_checkpoint(sub_bytes), std::runtime_error);
  CHECK_THROWS_AS(load_subnet(bytes), std::runtime_error);

  CHECK_THROWS_AS(load_checkpoint(std::vector<uint8_t>{}),
                  std::runtime_error);
}

TEST_CASE("checkpoint loading enforces the expected space") {
  auto s = small_space();
  Rng rng(95);
  auto net = init_supernet(s, rng);
  auto bytes = save_checkpoint(net);
  CHECK_NOTHROW(load_checkpoint(bytes, s));
  auto other = small_space(4);
  CHECK_THROWS_AS(load_checkpoint(bytes, other), std::runtime_error);
}

TEST_CASE("reshape_classifier keeps the backbone and resizes the head") {
  auto s = small_space();
  Rng rng(96);
  auto net = init_supernet(s, rng);
  auto hash_before = backbone_hash(net);
  Rng head_rng(97);
  reshape_classifier(net, 7, head_rng);
  CHECK(net.space.num_classes == 7);
  CHECK(net.cls_b.size() == 7u);
  CHECK(net.cls_w.size() == 7u * s.channel_width);
  CHECK(backbone_hash(net) == hash_before);
}

TEST_CASE("backbone hash ignores the classifier but sees the backbone") {
  auto s = small_space();
  Rng rng(98);
  auto net = init_supernet(s, rng);
  auto h0 = backbone_hash(net);
  net.cls_w[0] += 1.0;
  net.cls_b[0] += 1.0;
  CHECK(backbone_hash(net) == h0);
  net.stem_w[0] += 1.0;
  CHECK(backbone_hash(net) != h0);
}

TEST_CASE("logits_over_dataset matches per-batch path forwards") {
  auto s = small_space();
  Rng rng(99);
  auto net = init_supernet(s, rng);
  auto data = make_dataset(s, 3, rng);
  Genotype g{{1, 3, 2}};
  auto all = logits_over_dataset(net, g, data, 4);
  REQUIRE(all.rows == data.size());
  Batch one(1, data.channels, data.height, data.width);
  for (int i = 0; i < data.size(); ++i) {
    std::copy(data.example(i), data.example(i) + data.feature_dims(),
              one.v.begin());
    auto logits = forward_with_path(net, g, one);
    for (int c = 0; c < all.cols; ++c)
      CHECK(all.at(i, c) == doctest::Approx(logits.at(0, c)).epsilon(1e-12));
  }
}
