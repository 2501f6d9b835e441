#include "infovaegan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace ivg {

namespace {

constexpr char kMagic[4] = {'I', 'V', 'G', 'N'};

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
  }
  template <typename T>
  void le(T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t k = 0; k < sizeof(U); ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}
  template <typename T>
  T le() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) bits |= static_cast<U>(static_cast<U>(data_[pos_ + k]) << (8 * k));
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw CheckpointError("checkpoint: truncated data");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const Tensor& t) {
  w.le<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) w.le<std::uint64_t>(e);
  for (double v : t.values()) w.le<double>(v);
}

Tensor read_tensor(Reader& r) {
  const auto rank = r.le<std::uint32_t>();
  if (rank > 8) throw CheckpointError("checkpoint: implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& e : shape) e = r.le<std::uint64_t>();
  std::vector<double> values(numel(shape));
  for (auto& v : values) v = r.le<double>();
  return Tensor(std::move(shape), std::move(values));
}

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

std::vector<Tensor> mlp_tensors(const Mlp& net) {
  std::vector<Tensor> out;
  for (const Tensor* p : net.parameters()) out.push_back(p->detached());
  return out;
}

Mlp mlp_from(const std::vector<Tensor>& tensors, OutputHead head) {
  if (tensors.empty() || tensors.size() % 2 != 0) throw CheckpointError("checkpoint: malformed network section");
  Mlp net;
  net.head = head;
  for (std::size_t i = 0; i < tensors.size(); i += 2) {
    const Tensor& w = tensors[i];
    const Tensor& b = tensors[i + 1];
    if (w.rank() != 2 || b.rank() != 1 || b.shape()[0] != w.shape()[1]) {
      throw CheckpointError("checkpoint: inconsistent layer shapes");
    }
    if (!net.layers.empty() && net.layers.back().fan_out() != w.shape()[0]) {
      throw CheckpointError("checkpoint: layer extents do not chain");
    }
    net.layers.push_back({w, b});
  }
  return net;
}

std::vector<Tensor> adam_tensors(const AdamState& s) {
  std::vector<Tensor> out{vec({s.hyper.lr, s.hyper.beta1, s.hyper.beta2, s.hyper.eps, static_cast<double>(s.step)})};
  for (const auto& m : s.first_moment) out.push_back(vec(m));
  for (const auto& v : s.second_moment) out.push_back(vec(v));
  return out;
}

AdamState adam_from(const std::vector<Tensor>& t, const Mlp& net) {
  const std::size_t n = net.parameters().size();
  if (t.size() != 1 + 2 * n || t[0].size() != 5) throw CheckpointError("checkpoint: malformed optimizer section");
  AdamState s;
  s.hyper = {t[0].at(0), t[0].at(1), t[0].at(2), t[0].at(3)};
  s.step = static_cast<std::uint64_t>(t[0].at(4));
  const auto params = net.parameters();
  for (std::size_t i = 0; i < n; ++i) {
    if (t[1 + i].size() != params[i]->size() || t[1 + n + i].size() != params[i]->size()) {
      throw CheckpointError("checkpoint: optimizer state does not match network");
    }
    s.first_moment.emplace_back(t[1 + i].values().begin(), t[1 + i].values().end());
    s.second_moment.emplace_back(t[1 + n + i].values().begin(), t[1 + n + i].values().end());
  }
  return s;
}

std::size_t as_count(double v) {
  if (v < 0.0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
    throw CheckpointError("checkpoint: expected a non-negative integer, got " + std::to_string(v));
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<std::uint8_t> serialize_sections(const std::vector<CheckpointSection>& sections) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint8_t>(kCheckpointVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(s.name.size()));
    w.bytes(s.name.data(), s.name.size());
    Writer payload;
    payload.le<std::uint32_t>(static_cast<std::uint32_t>(s.tensors.size()));
    for (const auto& t : s.tensors) write_tensor(payload, t);
    w.le<std::uint64_t>(payload.out.size());
    w.bytes(payload.out.data(), payload.out.size());
  }
  w.le<std::uint64_t>(fnv1a64(w.out));
  return std::move(w.out);
}

std::vector<CheckpointSection> parse_sections(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 1 + 4 + 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("checkpoint: missing IVGN magic");
  }
  const auto body = bytes.first(bytes.size() - 8);
  Reader tail(bytes.last(8));
  if (tail.le<std::uint64_t>() != fnv1a64(body)) throw ChecksumError("checkpoint: checksum mismatch");

  Reader r(body);
  r.str(4);
  const auto version = r.le<std::uint8_t>();
  if (version != kCheckpointVersion) throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = r.le<std::uint32_t>();
  std::vector<CheckpointSection> sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointSection s;
    s.name = r.str(r.le<std::uint32_t>());
    const auto payload_len = r.le<std::uint64_t>();
    const std::size_t start = r.pos();
    const auto n = r.le<std::uint32_t>();
    for (std::uint32_t k = 0; k < n; ++k) s.tensors.push_back(read_tensor(r));
    if (r.pos() - start != payload_len) throw CheckpointError("checkpoint: section '" + s.name + "' length mismatch");
    sections.push_back(std::move(s));
  }
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes before checksum");
  return sections;
}

std::vector<std::uint8_t> save_checkpoint(const TrainState& state) {
  const auto& b = state.bundle;
  std::vector<double> layout;
  for (CodePart p : kGeneratorInputOrder) layout.push_back(static_cast<double>(p));
  std::vector<double> rng_words;
  for (std::uint64_t w : state.rng.state()) {
    rng_words.push_back(static_cast<double>(w >> 32));
    rng_words.push_back(static_cast<double>(w & 0xffffffffu));
  }
  std::vector<CheckpointSection> sections{
      {"code_layout", {vec(layout)}},
      {"prior",
       {vec({static_cast<double>(b.prior.z_dim), static_cast<double>(b.prior.c_dim),
             static_cast<double>(b.prior.categories), static_cast<double>(b.prior.continuous_law),
             b.prior.temperature})}},
      {"heads",
       {vec({static_cast<double>(b.generator.head), static_cast<double>(b.critic.head),
             static_cast<double>(b.encoder_u.head), static_cast<double>(b.encoder_z.head)})}},
      {"generator", mlp_tensors(b.generator)},
      {"critic", mlp_tensors(b.critic)},
      {"encoder_u", mlp_tensors(b.encoder_u)},
      {"encoder_z", mlp_tensors(b.encoder_z)},
      {"optimizer.critic", adam_tensors(state.critic_opt)},
      {"optimizer.generator", adam_tensors(state.generator_opt)},
      {"optimizer.encoder_u", adam_tensors(state.encoder_u_opt)},
      {"optimizer.encoder_z", adam_tensors(state.encoder_z_opt)},
      {"rng", {vec(rng_words)}},
      {"counters",
       {vec({static_cast<double>(state.stage_one_done), static_cast<double>(state.stage_two_done),
             static_cast<double>(state.records)})}},
  };
  return serialize_sections(sections);
}

TrainState load_checkpoint(std::span<const std::uint8_t> bytes) {
  std::map<std::string, std::vector<Tensor>> s;
  for (auto& sec : parse_sections(bytes)) s[sec.name] = std::move(sec.tensors);
  auto section = [&](const std::string& name) -> const std::vector<Tensor>& {
    auto it = s.find(name);
    if (it == s.end()) throw CheckpointError("checkpoint: missing section '" + name + "'");
    return it->second;
  };
  auto single = [&](const std::string& name, std::size_t n) -> const Tensor& {
    const auto& t = section(name);
    if (t.size() != 1 || t[0].size() != n) throw CheckpointError("checkpoint: malformed section '" + name + "'");
    return t[0];
  };

  const Tensor& layout = single("code_layout", kGeneratorInputOrder.size());
  for (std::size_t i = 0; i < kGeneratorInputOrder.size(); ++i) {
    if (layout.at(i) != static_cast<double>(kGeneratorInputOrder[i])) {
      throw CheckpointError("checkpoint: generator code layout differs from (z, d, c)");
    }
  }
  const Tensor& pr = single("prior", 5);
  PriorConfig prior;
  prior.z_dim = as_count(pr.at(0));
  prior.c_dim = as_count(pr.at(1));
  prior.categories = as_count(pr.at(2));
  const std::size_t law = as_count(pr.at(3));
  if (law > 1) throw CheckpointError("checkpoint: unknown continuous law");
  prior.continuous_law = static_cast<ContinuousLaw>(law);
  prior.temperature = pr.at(4);

  const Tensor& heads = single("heads", 4);
  auto head = [&](std::size_t i) {
    const std::size_t h = as_count(heads.at(i));
    if (h > 1) throw CheckpointError("checkpoint: unknown output head");
    return static_cast<OutputHead>(h);
  };
  ModelBundle bundle{mlp_from(section("generator"), head(0)), mlp_from(section("critic"), head(1)),
                     mlp_from(section("encoder_u"), head(2)), mlp_from(section("encoder_z"), head(3)), prior};
  try {
    bundle.validate();
  } catch (const ContractError& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }

  const Tensor& words = section("rng").at(0);
  if (words.size() % 2 != 0) throw CheckpointError("checkpoint: malformed rng section");
  std::vector<std::uint64_t> rng_state;
  for (std::size_t i = 0; i < words.size(); i += 2) {
    rng_state.push_back((static_cast<std::uint64_t>(as_count(words.at(i))) << 32) |
                        static_cast<std::uint64_t>(as_count(words.at(i + 1))));
  }

  TrainState state{bundle, {}, {}, {}, {}, Rng::from_state(rng_state)};
  state.critic_opt = adam_from(section("optimizer.critic"), bundle.critic);
  state.generator_opt = adam_from(section("optimizer.generator"), bundle.generator);
  state.encoder_u_opt = adam_from(section("optimizer.encoder_u"), bundle.encoder_u);
  state.encoder_z_opt = adam_from(section("optimizer.encoder_z"), bundle.encoder_z);
  const Tensor& counters = single("counters", 3);
  state.stage_one_done = as_count(counters.at(0));
  state.stage_two_done = as_count(counters.at(1));
  state.records = as_count(counters.at(2));
  return state;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw CheckpointError("failed writing " + path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace ivg
