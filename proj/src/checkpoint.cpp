#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "mtda/config.hpp"
#include "mtda/errors.hpp"
#include "mtda/trainer.hpp"

namespace mtda {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'D', 'A', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian hosts");

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void u64(std::uint64_t v) { pod(v); }
  void f64(double v) { pod(v); }
  void str(const std::string& s) {
    u64(s.size());
    buf_ += s;
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void tensor(const Tensor& t) {
    u64(t.rank());
    for (std::size_t d : t.shape()) u64(d);
    buf_.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::size_t end) : buf_(buf), end_(end) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    const std::size_t n = count();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const std::size_t n = count();
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), buf_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  Tensor tensor() {
    const std::size_t rank = count();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = count();
    Tensor t(shape);
    need(t.size() * sizeof(double));
    std::memcpy(t.data(), buf_.data() + pos_, t.size() * sizeof(double));
    pos_ += t.size() * sizeof(double);
    return t;
  }
  std::size_t count() {
    const std::uint64_t n = u64();
    if (n > end_) throw CheckpointError("checkpoint is corrupt (implausible length)");
    return static_cast<std::size_t>(n);
  }
  bool at_end() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw CheckpointError("checkpoint is truncated");
  }
  const std::string& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

void write_params(Writer& w, const std::vector<const Parameter*>& params) {
  w.u64(params.size());
  for (const Parameter* p : params) {
    w.str(p->name);
    w.tensor(p->value);
  }
}

void read_params(Reader& r, std::vector<Parameter*> params, const std::string& what) {
  if (r.count() != params.size()) throw CheckpointError(what + ": parameter count mismatch");
  for (Parameter* p : params) {
    const std::string name = r.str();
    Tensor t = r.tensor();
    if (name != p->name || t.shape() != p->value.shape())
      throw CheckpointError(what + ": parameter '" + name + "' does not match architecture ('" + p->name + "')");
    p->value = std::move(t);
  }
}

void write_learner(Writer& w, const Learner& l) {
  const ClassifierNetwork& n = l.net;
  w.str(to_string(n.preset()));
  w.u64(n.input_shape().height);
  w.u64(n.input_shape().width);
  w.u64(n.input_shape().channels);
  w.u64(n.num_classes());
  w.u64(n.feature_dim());
  w.u64(n.seed());
  write_params(w, n.parameters());

  w.u64(l.dclf.feature_dim());
  w.u64(l.dclf.seed());
  w.f64(l.dclf.grl_lambda());
  write_params(w, l.dclf.parameters());

  w.f64(l.opt.lr());
  w.f64(l.opt.momentum());
  w.f64(l.opt.weight_decay());
  w.u64(l.opt.groups().size());
  for (const auto& g : l.opt.groups()) {
    w.str(g.name);
    w.u64(g.velocity.size());
    for (const Tensor& v : g.velocity) w.tensor(v);
  }
}

Learner read_learner(Reader& r) {
  const Preset preset = parse_preset(r.str());
  ImageShape shape;
  shape.height = r.count();
  shape.width = r.count();
  shape.channels = r.count();
  const std::size_t classes = r.count();
  const std::size_t fdim = r.count();
  const std::uint64_t seed = r.u64();
  ClassifierNetwork net = build_backbone(preset, shape, classes, seed, fdim);
  read_params(r, net.parameters(), "network");

  const std::size_t dfdim = r.count();
  const std::uint64_t dseed = r.u64();
  const double lambda = r.f64();
  DomainClassifier dclf(dfdim, dseed, lambda);
  read_params(r, dclf.parameters(), "domain classifier");

  const double lr = r.f64(), momentum = r.f64(), decay = r.f64();
  Learner l(std::move(net), std::move(dclf), Sgd(lr, momentum, decay));
  if (r.count() != l.opt.groups().size()) throw CheckpointError("optimizer group count mismatch");
  for (auto& g : l.opt.groups()) {
    if (r.str() != g.name) throw CheckpointError("optimizer group name mismatch");
    if (r.count() != g.velocity.size()) throw CheckpointError("optimizer state size mismatch");
    for (Tensor& v : g.velocity) {
      Tensor t = r.tensor();
      if (t.shape() != v.shape()) throw CheckpointError("optimizer velocity shape mismatch");
      v = std::move(t);
    }
  }
  return l;
}

void write_counters(Writer& w, const StepCounters& c) {
  w.u64(c.da_steps);
  w.u64(c.kd_source_steps);
  w.u64(c.kd_target_steps);
  w.u64(c.source_ce_steps);
}

StepCounters read_counters(Reader& r) {
  StepCounters c;
  c.da_steps = r.u64();
  c.kd_source_steps = r.u64();
  c.kd_target_steps = r.u64();
  c.source_ce_steps = r.u64();
  return c;
}

}  // namespace

void checkpoint_save(const RunState& state, const std::filesystem::path& path) {
  Writer w;
  w.buffer().append(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(config_to_json(state.config).dump());
  w.u64(state.epoch);
  w.f64(state.beta);
  write_counters(w, state.counters);
  w.u64(state.history.size());
  for (const EpochSnapshot& s : state.history) {
    w.u64(s.epoch);
    w.f64(s.beta);
    w.doubles(s.accuracies);
    w.f64(s.equal_weight);
    write_counters(w, s.counters);
  }
  w.u64(state.training_target_ids.size());
  for (const auto& id : state.training_target_ids) w.str(id);
  w.u64(state.teachers.size());
  for (const Learner& t : state.teachers) write_learner(w, t);
  write_learner(w, state.student_learner());
  const std::uint64_t sum = fnv1a(w.buffer());
  w.u64(sum);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw IoError("short write to checkpoint '" + path.string() + "'");
}

RunState checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::string buf{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (buf.size() < sizeof kMagic + 4 + 8 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("'" + path.string() + "' is not a checkpoint (bad magic or truncated)");
  std::uint32_t version;
  std::memcpy(&version, buf.data() + sizeof kMagic, sizeof version);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is incompatible with version " +
                          std::to_string(kCheckpointVersion));
  const std::size_t body = buf.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + body, sizeof stored);
  if (fnv1a(buf.substr(0, body)) != stored)
    throw CheckpointError("checkpoint '" + path.string() + "' is truncated or corrupt (checksum mismatch)");

  Reader r(buf, body);
  r.pod<std::array<char, sizeof kMagic>>();
  r.pod<std::uint32_t>();
  RunState state;
  try {
    state.config = config_from_json(nlohmann::json::parse(r.str()));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config unreadable: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config incompatible: ") + e.what());
  }
  state.epoch = r.count();
  state.beta = r.f64();
  state.counters = read_counters(r);
  state.history.resize(r.count());
  for (EpochSnapshot& s : state.history) {
    s.epoch = r.count();
    s.beta = r.f64();
    s.accuracies = r.doubles();
    s.equal_weight = r.f64();
    s.counters = read_counters(r);
  }
  state.training_target_ids.resize(r.count());
  for (auto& id : state.training_target_ids) id = r.str();
  const std::size_t n_teachers = r.count();
  for (std::size_t i = 0; i < n_teachers; ++i) state.teachers.push_back(read_learner(r));
  state.student.push_back(read_learner(r));
  if (!r.at_end()) throw CheckpointError("checkpoint has trailing data");
  return state;
}

}  // namespace mtda
