#include "ltnas/supernet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "engine.hpp"
#include "json_util.hpp"
#include "ltnas/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace ltnas::supernet {

using engine::f32;
using imbalance::LabeledDataset;
using imbalance::ReweightPolicy;
using space::Genotype;
using space::OpKind;
using space::SearchSpace;

// ============================ schedules ============================

TrainSchedule default_supernet_schedule() {
  TrainSchedule s;
  s.epochs = 500;
  s.initial_lr = 0.1;
  s.milestones = {300, 400};
  s.decay_factor = 0.01;
  s.momentum = 0.9;
  s.weight_decay = 5e-4;
  s.batch_size = 128;
  return s;
}

TrainSchedule default_subnet_schedule() {
  TrainSchedule s = default_supernet_schedule();
  s.epochs = 200;
  s.milestones = {160, 180};
  return s;
}

TrainSchedule default_adaptation_schedule() {
  TrainSchedule s = default_supernet_schedule();
  s.epochs = 200;
  s.initial_lr = 0.01;
  s.milestones = {100};
  return s;
}

namespace {

void check_schedule(const TrainSchedule& s) {
  if (s.epochs < 0) throw std::invalid_argument("schedule: negative epochs");
  if (!(s.initial_lr > 0.0))
    throw std::invalid_argument("schedule: initial_lr must be positive");
  if (!(s.decay_factor > 0.0) || s.decay_factor > 1.0)
    throw std::invalid_argument("schedule: decay_factor must be in (0, 1]");
  if (!(s.momentum >= 0.0) || s.momentum >= 1.0)
    throw std::invalid_argument("schedule: momentum must be in [0, 1)");
  if (s.weight_decay < 0.0)
    throw std::invalid_argument("schedule: negative weight_decay");
  if (s.batch_size < 1)
    throw std::invalid_argument("schedule: batch_size must be >= 1");
  for (size_t i = 0; i < s.milestones.size(); ++i) {
    if (s.milestones[i] < 0 || s.milestones[i] >= s.epochs)
      throw std::invalid_argument("schedule: milestone " +
                                  std::to_string(s.milestones[i]) +
                                  " outside [0, epochs)");
    if (i > 0 && s.milestones[i] <= s.milestones[i - 1])
      throw std::invalid_argument(
          "schedule: milestones must be strictly increasing");
  }
}

}  // namespace

double lr_at_epoch(const TrainSchedule& schedule, int epoch) {
  check_schedule(schedule);
  if (epoch < 0 || epoch >= schedule.epochs)
    throw std::out_of_range("lr_at_epoch: epoch " + std::to_string(epoch) +
                            " outside [0, " +
                            std::to_string(schedule.epochs) + ")");
  int hits = 0;
  for (int m : schedule.milestones)
    if (m <= epoch) ++hits;
  return schedule.initial_lr * std::pow(schedule.decay_factor, hits);
}

uint64_t schedule_fingerprint(const TrainSchedule& s) {
  std::ostringstream os;
  os << "epochs=" << s.epochs << ";lr=" << s.initial_lr << ";ms=";
  for (size_t i = 0; i < s.milestones.size(); ++i) {
    if (i) os << ',';
    os << s.milestones[i];
  }
  os << ";decay=" << s.decay_factor << ";mom=" << s.momentum
     << ";wd=" << s.weight_decay << ";bs=" << s.batch_size;
  return fnv1a64(os.str());
}

// ========================== initialization ==========================

namespace {

void fill_uniform(std::vector<double>& v, size_t n, double bound, Rng& rng) {
  v.resize(n);
  for (size_t i = 0; i < n; ++i) v[i] = f32(rng.uniform(-bound, bound));
}

OpParams init_op(OpKind kind, int channels, Rng& rng) {
  OpParams p;
  p.kind = kind;
  if (space::op_has_kernel(kind)) {
    const int k = space::op_kernel_size(kind);
    fill_uniform(p.dw, static_cast<size_t>(channels) * k * k,
                 1.0 / std::sqrt(static_cast<double>(k) * k), rng);
    fill_uniform(p.pw, static_cast<size_t>(channels) * channels,
                 1.0 / std::sqrt(static_cast<double>(channels)), rng);
  }
  if (space::op_has_norm(kind)) {
    p.norm.gamma.assign(channels, 1.0);
    p.norm.beta.assign(channels, 0.0);
    p.norm.mean.assign(channels, 0.0);
    p.norm.var.assign(channels, 1.0);
  }
  return p;
}

}  // namespace

SuperNetwork init_supernet(const SearchSpace& space, Rng& rng) {
  SuperNetwork net;
  net.space = space;
  net.rng_seed = rng.seed();
  const int C = space.channel_width;
  fill_uniform(net.stem_w, static_cast<size_t>(C) * space.input_channels,
               1.0 / std::sqrt(static_cast<double>(space.input_channels)),
               rng);
  net.stem_b.assign(C, 0.0);
  net.edge_ops.resize(space.num_edges());
  for (int e = 0; e < space.num_edges(); ++e) {
    net.edge_ops[e].reserve(space.num_ops());
    for (int o = 0; o < space.num_ops(); ++o)
      net.edge_ops[e].push_back(init_op(space.candidate_ops[o], C, rng));
  }
  fill_uniform(net.cls_w, static_cast<size_t>(space.num_classes) * C,
               1.0 / std::sqrt(static_cast<double>(C)), rng);
  net.cls_b.assign(space.num_classes, 0.0);
  return net;
}

Subnet init_subnet(const SearchSpace& space, const Genotype& g, Rng& rng) {
  engine::check_genotype(space, g);
  Subnet sub;
  sub.space = space;
  sub.genotype = g;
  sub.rng_seed = rng.seed();
  const int C = space.channel_width;
  fill_uniform(sub.stem_w, static_cast<size_t>(C) * space.input_channels,
               1.0 / std::sqrt(static_cast<double>(space.input_channels)),
               rng);
  sub.stem_b.assign(C, 0.0);
  sub.ops.reserve(space.num_edges());
  for (int e = 0; e < space.num_edges(); ++e)
    sub.ops.push_back(init_op(space.candidate_ops[g.ops[e]], C, rng));
  fill_uniform(sub.cls_w, static_cast<size_t>(space.num_classes) * C,
               1.0 / std::sqrt(static_cast<double>(C)), rng);
  sub.cls_b.assign(space.num_classes, 0.0);
  return sub;
}

void reshape_classifier(SuperNetwork& net, int num_classes, Rng& rng) {
  if (num_classes < 2)
    throw std::invalid_argument("reshape_classifier: num_classes must be >= 2");
  const int C = net.space.channel_width;
  net.space.num_classes = num_classes;
  fill_uniform(net.cls_w, static_cast<size_t>(num_classes) * C,
               1.0 / std::sqrt(static_cast<double>(C)), rng);
  net.cls_b.assign(num_classes, 0.0);
}

// ============================ forwards ============================

Mat forward_with_path(const SuperNetwork& net, const Genotype& g,
                      const Batch& input) {
  // eval mode never mutates the network
  auto& mut = const_cast<SuperNetwork&>(net);
  engine::ModelView v = engine::view_of(mut, g);
  engine::PathTape tape;
  return engine::forward_path(v, input, engine::StatsMode::eval, tape);
}

Mat forward_with_mixture(const SuperNetwork& net,
                         const space::MixtureParams& mix, const Batch& input) {
  auto& mut = const_cast<SuperNetwork&>(net);
  engine::MixtureTape tape;
  return engine::forward_mixture(mut, mix, input, engine::StatsMode::eval,
                                 tape);
}

Mat forward_subnet(const Subnet& sub, const Batch& input) {
  auto& mut = const_cast<Subnet&>(sub);
  engine::ModelView v = engine::view_of(mut);
  engine::PathTape tape;
  return engine::forward_path(v, input, engine::StatsMode::eval, tape);
}

namespace {

void check_dataset_for_space(const SearchSpace& s, const LabeledDataset& d) {
  if (d.size() == 0) throw std::invalid_argument("dataset is empty");
  if (d.channels != s.input_channels || d.height != s.input_height ||
      d.width != s.input_width)
    throw std::invalid_argument("dataset geometry does not match space input");
  if (d.num_classes != s.num_classes)
    throw std::invalid_argument("dataset has " +
                                std::to_string(d.num_classes) +
                                " classes, space expects " +
                                std::to_string(s.num_classes));
}

template <typename ForwardFn>
Mat logits_batched(const SearchSpace& s, const LabeledDataset& data,
                   int batch_size, ForwardFn&& fwd) {
  check_dataset_for_space(s, data);
  Mat out(data.size(), s.num_classes);
  std::vector<int> order(data.size());
  for (int i = 0; i < data.size(); ++i) order[i] = i;
  for (int start = 0; start < data.size(); start += batch_size) {
    const int count = std::min(batch_size, data.size() - start);
    Batch bx = engine::gather_batch(data, order, start, count, nullptr);
    Mat logits = fwd(bx);
    std::memcpy(out.row(start), logits.v.data(),
                sizeof(double) * logits.v.size());
  }
  return out;
}

}  // namespace

Mat logits_over_dataset(const SuperNetwork& net, const Genotype& g,
                        const LabeledDataset& data, int batch_size) {
  return logits_batched(net.space, data, batch_size, [&](const Batch& bx) {
    return forward_with_path(net, g, bx);
  });
}

Mat logits_over_dataset(const Subnet& sub, const LabeledDataset& data,
                        int batch_size) {
  return logits_batched(sub.space, data, batch_size, [&](const Batch& bx) {
    return forward_subnet(sub, bx);
  });
}

// ============================ training ============================

namespace {

TrainLog train_common(const SearchSpace& sp, const LabeledDataset& data,
                      const TrainSchedule& sched, const ReweightPolicy& policy,
                      Rng& rng, const TrainOptions& opts, SuperNetwork* net,
                      Subnet* sub) {
  check_schedule(sched);
  check_dataset_for_space(sp, data);
  const std::vector<int> counts = imbalance::class_counts(data);
  engine::SgdState st;
  if (net)
    engine::sgd_init(st, *net);
  else
    engine::sgd_init(st, *sub);

  std::vector<int> order(data.size());
  for (int i = 0; i < data.size(); ++i) order[i] = i;

  TrainLog log;
  const engine::StatsMode mode = opts.update_norm_stats
                                     ? engine::StatsMode::train
                                     : engine::StatsMode::eval;
  for (int epoch = 0; epoch < sched.epochs; ++epoch) {
    const double lr = lr_at_epoch(sched, epoch);
    const std::vector<double> weights =
        imbalance::drw_weights_raw(epoch, policy, counts);
    Rng shuffle_rng = rng.derive("shuffle", epoch);
    shuffle_rng.shuffle(order);
    Rng path_rng = rng.derive("path", epoch);

    double loss_acc = 0.0;
    for (int start = 0; start < data.size(); start += sched.batch_size) {
      const int count = std::min(sched.batch_size, data.size() - start);
      std::vector<int> labels;
      Batch bx = engine::gather_batch(data, order, start, count, &labels);
      engine::ModelView view;
      Genotype g;
      if (net) {
        g = space::random_genotype(sp, path_rng);
        view = engine::view_of(*net, g);
      } else {
        view = engine::view_of(*sub);
      }
      engine::PathTape tape;
      Mat logits = engine::forward_path(view, bx, mode, tape);
      Mat dlogits;
      const double loss = imbalance::weighted_cross_entropy_grad(
          logits, labels, weights, &dlogits);
      engine::PathGrads grads;
      engine::backward_path(view, bx, tape, dlogits, grads);
      log.updated_elements += engine::sgd_apply_path(
          view, grads, st, lr, sched.momentum, sched.weight_decay, opts);
      loss_acc += loss * count;
    }
    log.epochs.push_back({epoch, loss_acc / data.size(), lr});
  }
  const uint64_t fp = schedule_fingerprint(sched);
  if (net) {
    net->epoch_counter += sched.epochs;
    net->rng_seed = rng.seed();
    net->schedule_fp = fp;
  } else {
    sub->epoch_counter += sched.epochs;
    sub->rng_seed = rng.seed();
    sub->schedule_fp = fp;
  }
  return log;
}

}  // namespace

TrainLog train_supernet(SuperNetwork& net, const LabeledDataset& data,
                        const TrainSchedule& schedule,
                        const ReweightPolicy& policy, Rng& rng,
                        const TrainOptions& opts) {
  return train_common(net.space, data, schedule, policy, rng, opts, &net,
                      nullptr);
}

TrainLog train_subnet(Subnet& sub, const LabeledDataset& data,
                      const TrainSchedule& schedule,
                      const ReweightPolicy& policy, Rng& rng) {
  return train_common(sub.space, data, schedule, policy, rng, TrainOptions{},
                      nullptr, &sub);
}

// ========================== recalibration ==========================

void recalibrate_norm_stats(SuperNetwork& net, const Genotype& g,
                            const LabeledDataset& calib) {
  check_dataset_for_space(net.space, calib);
  engine::ModelView v = engine::view_of(net, g);
  std::vector<int> order(calib.size());
  for (int i = 0; i < calib.size(); ++i) order[i] = i;
  Batch bx = engine::gather_batch(calib, order, 0, calib.size(), nullptr);
  engine::PathTape tape;
  engine::forward_path(v, bx, engine::StatsMode::recalibrate, tape);
}

void recalibrate_norm_stats(Subnet& sub, const LabeledDataset& calib) {
  check_dataset_for_space(sub.space, calib);
  engine::ModelView v = engine::view_of(sub);
  std::vector<int> order(calib.size());
  for (int i = 0; i < calib.size(); ++i) order[i] = i;
  Batch bx = engine::gather_batch(calib, order, 0, calib.size(), nullptr);
  engine::PathTape tape;
  engine::forward_path(v, bx, engine::StatsMode::recalibrate, tape);
}

// ============================ extraction ============================

Subnet extract_subnet(const SuperNetwork& net, const Genotype& g) {
  engine::check_genotype(net.space, g);
  Subnet sub;
  sub.space = net.space;
  sub.genotype = g;
  sub.stem_w = net.stem_w;
  sub.stem_b = net.stem_b;
  sub.ops.reserve(net.space.num_edges());
  for (int e = 0; e < net.space.num_edges(); ++e)
    sub.ops.push_back(net.edge_ops[e][g.ops[e]]);
  sub.cls_w = net.cls_w;
  sub.cls_b = net.cls_b;
  sub.epoch_counter = net.epoch_counter;
  sub.rng_seed = net.rng_seed;
  sub.schedule_fp = net.schedule_fp;
  return sub;
}

namespace {

size_t op_trainable_count(const OpParams& p) {
  size_t n = 0;
  if (space::op_has_kernel(p.kind)) n += p.dw.size() + p.pw.size();
  if (space::op_has_norm(p.kind))
    n += p.norm.gamma.size() + p.norm.beta.size();
  return n;
}

}  // namespace

size_t trainable_param_count(const SuperNetwork& net) {
  size_t n = net.stem_w.size() + net.stem_b.size() + net.cls_w.size() +
             net.cls_b.size();
  for (const auto& ops : net.edge_ops)
    for (const auto& p : ops) n += op_trainable_count(p);
  return n;
}

size_t trainable_param_count(const Subnet& sub) {
  size_t n = sub.stem_w.size() + sub.stem_b.size() + sub.cls_w.size() +
             sub.cls_b.size();
  for (const auto& p : sub.ops) n += op_trainable_count(p);
  return n;
}

// ============================ checkpoints ============================

namespace {

struct BlockRef {
  std::string name;
  std::vector<double>* data;
};

void op_blocks(const std::string& prefix, OpParams& p,
               std::vector<BlockRef>& out) {
  if (space::op_has_kernel(p.kind)) {
    out.push_back({prefix + "dw", &p.dw});
    out.push_back({prefix + "pw", &p.pw});
  }
  if (space::op_has_norm(p.kind)) {
    out.push_back({prefix + "norm.gamma", &p.norm.gamma});
    out.push_back({prefix + "norm.beta", &p.norm.beta});
    out.push_back({prefix + "norm.mean", &p.norm.mean});
    out.push_back({prefix + "norm.var", &p.norm.var});
  }
}

std::vector<BlockRef> collect_blocks(SuperNetwork& net) {
  std::vector<BlockRef> out;
  out.push_back({"stem.w", &net.stem_w});
  out.push_back({"stem.b", &net.stem_b});
  for (int e = 0; e < net.space.num_edges(); ++e)
    for (int o = 0; o < net.space.num_ops(); ++o)
      op_blocks("edge" + std::to_string(e) + ".op" + std::to_string(o) + ".",
                net.edge_ops[e][o], out);
  out.push_back({"cls.w", &net.cls_w});
  out.push_back({"cls.b", &net.cls_b});
  return out;
}

std::vector<BlockRef> collect_blocks(Subnet& sub) {
  std::vector<BlockRef> out;
  out.push_back({"stem.w", &sub.stem_w});
  out.push_back({"stem.b", &sub.stem_b});
  for (int e = 0; e < sub.space.num_edges(); ++e)
    op_blocks("edge" + std::to_string(e) + ".", sub.ops[e], out);
  out.push_back({"cls.w", &sub.cls_w});
  out.push_back({"cls.b", &sub.cls_b});
  return out;
}

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
  const size_t at = out.size();
  out.resize(at + 4);
  std::memcpy(out.data() + at, &v, 4);
}

void append_f32(std::vector<uint8_t>& out, float v) {
  const size_t at = out.size();
  out.resize(at + 4);
  std::memcpy(out.data() + at, &v, 4);
}

std::string hex16(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::vector<uint8_t> save_common(const std::string& kind,
                                 const std::string& genotype_token,
                                 const space::SearchSpace& sp, long epoch,
                                 uint64_t seed, uint64_t schedule_fp,
                                 std::vector<BlockRef> blocks) {
  std::string header;
  header += "ltnas-checkpoint v1\n";
  header += "kind: " + kind + "\n";
  header += "space: " + space_to_json(sp).dump() + "\n";
  if (kind == "subnet") header += "genotype: " + genotype_token + "\n";
  header += "epoch: " + std::to_string(epoch) + "\n";
  header += "seed: " + std::to_string(seed) + "\n";
  header += "schedule: " + hex16(schedule_fp) + "\n";
  header += "blocks: " + std::to_string(blocks.size()) + "\n";
  header += "checksum: " + hex16(fnv1a64(header)) + "\n\n";

  std::vector<uint8_t> out(header.begin(), header.end());
  for (const BlockRef& b : blocks) {
    append_u32(out, static_cast<uint32_t>(b.name.size()));
    out.insert(out.end(), b.name.begin(), b.name.end());
    append_u32(out, static_cast<uint32_t>(b.data->size()));
    for (double x : *b.data) append_f32(out, static_cast<float>(x));
  }
  return out;
}

struct Header {
  std::string kind;
  space::SearchSpace space;
  std::string genotype_token;
  long epoch = 0;
  uint64_t seed = 0;
  uint64_t schedule_fp = 0;
  size_t blocks = 0;
  size_t body_offset = 0;
};

long parse_long(const std::string& s, const std::string& field) {
  try {
    size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("checkpoint: malformed " + field + " field");
  }
}

uint64_t parse_u64(const std::string& s, const std::string& field) {
  try {
    size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("checkpoint: malformed " + field + " field");
  }
}

uint64_t parse_hex64(const std::string& s, const std::string& field) {
  if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") !=
                            std::string::npos)
    throw std::runtime_error("checkpoint: malformed " + field + " field");
  return std::stoull(s, nullptr, 16);
}

Header parse_header(const std::vector<uint8_t>& bytes) {
  Header h;
  size_t pos = 0;
  auto next_line = [&]() -> std::string {
    size_t nl = pos;
    while (nl < bytes.size() && bytes[nl] != '\n') ++nl;
    if (nl == bytes.size())
      throw std::runtime_error("checkpoint: truncated header");
    std::string line(bytes.begin() + pos, bytes.begin() + nl);
    pos = nl + 1;
    return line;
  };

  if (next_line() != "ltnas-checkpoint v1")
    throw std::runtime_error(
        "checkpoint: bad magic or unsupported format version");

  size_t checksum_start = 0;
  uint64_t stated_checksum = 0;
  bool have_checksum = false;
  bool have_space = false;
  while (true) {
    const size_t line_start = pos;
    std::string line = next_line();
    if (line.empty()) break;  // header terminator
    const size_t colon = line.find(": ");
    if (colon == std::string::npos)
      throw std::runtime_error("checkpoint: malformed header line '" + line +
                               "'");
    const std::string key = line.substr(0, colon);
    const std::string val = line.substr(colon + 2);
    if (key == "kind") {
      if (val != "supernet" && val != "subnet")
        throw std::runtime_error("checkpoint: unknown kind '" + val + "'");
      h.kind = val;
    } else if (key == "space") {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(val);
      } catch (const std::exception& e) {
        throw std::runtime_error(
            std::string("checkpoint: malformed space field: ") + e.what());
      }
      h.space = space_from_json(j);
      have_space = true;
    } else if (key == "genotype") {
      h.genotype_token = val;
    } else if (key == "epoch") {
      h.epoch = parse_long(val, "epoch");
    } else if (key == "seed") {
      h.seed = parse_u64(val, "seed");
    } else if (key == "schedule") {
      h.schedule_fp = parse_hex64(val, "schedule");
    } else if (key == "blocks") {
      h.blocks = static_cast<size_t>(parse_long(val, "blocks"));
    } else if (key == "checksum") {
      stated_checksum = parse_hex64(val, "checksum");
      checksum_start = line_start;
      have_checksum = true;
    } else {
      throw std::runtime_error("checkpoint: unknown header field '" + key +
                               "'");
    }
  }
  if (h.kind.empty())
    throw std::runtime_error("checkpoint: missing kind field");
  if (!have_space) throw std::runtime_error("checkpoint: missing space field");
  if (!have_checksum)
    throw std::runtime_error("checkpoint: missing checksum field");
  const uint64_t actual = fnv1a64(bytes.data(), checksum_start);
  if (actual != stated_checksum)
    throw std::runtime_error(
        "checkpoint: header checksum mismatch, file is corrupt");
  h.body_offset = pos;
  return h;
}

void read_blocks(const std::vector<uint8_t>& bytes, size_t pos,
                 const std::vector<BlockRef>& expect, size_t stated_blocks) {
  if (stated_blocks != expect.size())
    throw std::runtime_error("checkpoint: header declares " +
                             std::to_string(stated_blocks) + " blocks, space " +
                             "implies " + std::to_string(expect.size()));
  auto read_u32 = [&](const std::string& what) -> uint32_t {
    if (pos + 4 > bytes.size())
      throw std::runtime_error("checkpoint: truncated while reading " + what);
    uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  };
  for (const BlockRef& b : expect) {
    const uint32_t name_len = read_u32("block name length");
    if (pos + name_len > bytes.size())
      throw std::runtime_error("checkpoint: truncated block name");
    std::string name(bytes.begin() + pos, bytes.begin() + pos + name_len);
    pos += name_len;
    if (name != b.name)
      throw std::runtime_error("checkpoint: expected block '" + b.name +
                               "', found '" + name + "'");
    const uint32_t count = read_u32("block '" + b.name + "' length");
    if (count != b.data->size())
      throw std::runtime_error(
          "checkpoint: block '" + b.name + "' holds " + std::to_string(count) +
          " values, expected " + std::to_string(b.data->size()));
    if (pos + static_cast<size_t>(count) * 4 > bytes.size())
      throw std::runtime_error("checkpoint: truncated block '" + b.name + "'");
    for (uint32_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, bytes.data() + pos, 4);
      pos += 4;
      (*b.data)[i] = static_cast<double>(f);
    }
  }
  if (pos != bytes.size())
    throw std::runtime_error("checkpoint: trailing bytes after last block");
}

// zero-parameter network with the right shapes
SuperNetwork allocate_supernet(const SearchSpace& sp) {
  SuperNetwork net;
  net.space = sp;
  Rng rng(0);
  net = init_supernet(sp, rng);
  return net;
}

}  // namespace

std::vector<uint8_t> save_checkpoint(const SuperNetwork& net) {
  auto& mut = const_cast<SuperNetwork&>(net);
  return save_common("supernet", "", net.space, net.epoch_counter,
                     net.rng_seed, net.schedule_fp, collect_blocks(mut));
}

SuperNetwork load_checkpoint(const std::vector<uint8_t>& bytes) {
  Header h = parse_header(bytes);
  if (h.kind != "supernet")
    throw std::runtime_error("checkpoint: expected a supernet checkpoint, " +
                             std::string("found kind '") + h.kind + "'");
  SuperNetwork net = allocate_supernet(h.space);
  net.epoch_counter = h.epoch;
  net.rng_seed = h.seed;
  net.schedule_fp = h.schedule_fp;
  read_blocks(bytes, h.body_offset, collect_blocks(net), h.blocks);
  return net;
}

SuperNetwork load_checkpoint(const std::vector<uint8_t>& bytes,
                             const SearchSpace& expected) {
  SuperNetwork net = load_checkpoint(bytes);
  if (!net.space.same_as(expected))
    throw std::runtime_error(
        "checkpoint: stored space description does not match the expected "
        "space");
  return net;
}

std::vector<uint8_t> save_subnet(const Subnet& sub) {
  auto& mut = const_cast<Subnet&>(sub);
  return save_common("subnet", space::encode_genotype(sub.genotype), sub.space,
                     sub.epoch_counter, sub.rng_seed, sub.schedule_fp,
                     collect_blocks(mut));
}

Subnet load_subnet(const std::vector<uint8_t>& bytes) {
  Header h = parse_header(bytes);
  if (h.kind != "subnet")
    throw std::runtime_error("checkpoint: expected a subnet checkpoint, " +
                             std::string("found kind '") + h.kind + "'");
  Genotype g = space::decode_genotype(h.genotype_token, h.space);
  Rng rng(0);
  Subnet sub = init_subnet(h.space, g, rng);
  sub.epoch_counter = h.epoch;
  sub.rng_seed = h.seed;
  sub.schedule_fp = h.schedule_fp;
  read_blocks(bytes, h.body_offset, collect_blocks(sub), h.blocks);
  return sub;
}

// ============================ hashing / io ============================

uint64_t backbone_hash(const SuperNetwork& net) {
  auto& mut = const_cast<SuperNetwork&>(net);
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](const std::vector<double>& v) {
    for (double x : v) {
      const float f = static_cast<float>(x);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      for (int i = 0; i < 4; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
      }
    }
  };
  for (const BlockRef& b : collect_blocks(mut)) {
    if (b.name.rfind("cls.", 0) == 0) continue;
    mix(*b.data);
  }
  return h;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace ltnas::supernet
