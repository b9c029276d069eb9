#include "longview/tensor/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace longview {

namespace {

constexpr char kMagic[4] = {'L', 'V', 'C', 'P'};

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 24));
}

void put_u64(std::vector<unsigned char>& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v));
  put_u32(out, static_cast<uint32_t>(v >> 32));
}

void put_f32(std::vector<unsigned char>& out, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

void put_str(std::vector<unsigned char>& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

void put_floats(std::vector<unsigned char>& out, const std::vector<float>& v) {
  put_u32(out, static_cast<uint32_t>(v.size()));
  for (float f : v) put_f32(out, f);
}

struct Reader {
  const std::vector<unsigned char>& buf;
  size_t pos = 0;

  void need(size_t n) {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = static_cast<uint32_t>(buf[pos]) | (static_cast<uint32_t>(buf[pos + 1]) << 8) |
                 (static_cast<uint32_t>(buf[pos + 2]) << 16) |
                 (static_cast<uint32_t>(buf[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    uint64_t lo = u32();
    uint64_t hi = u32();
    return lo | (hi << 32);
  }
  float f32() {
    uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s(buf.begin() + static_cast<long>(pos), buf.begin() + static_cast<long>(pos + n));
    pos += n;
    return s;
  }
  std::vector<float> floats() {
    uint32_t n = u32();
    std::vector<float> v(n);
    for (uint32_t i = 0; i < n; ++i) v[i] = f32();
    return v;
  }
};

void put_named(std::vector<unsigned char>& out, const NamedTensors& named) {
  put_u32(out, static_cast<uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    put_str(out, name);
    put_u32(out, static_cast<uint32_t>(t->shape.size()));
    for (int d : t->shape) put_u32(out, static_cast<uint32_t>(d));
    put_floats(out, t->data);
  }
}

NamedTensors read_named(Reader& r) {
  NamedTensors named;
  uint32_t count = r.u32();
  named.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    uint32_t rank = r.u32();
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(r.u32());
    std::vector<float> data = r.floats();
    named.emplace_back(std::move(name), Tensor::create(std::move(shape), std::move(data)));
  }
  return named;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& ckpt) {
  std::vector<unsigned char> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, CheckpointData::kFormatVersion);

  put_u32(out, static_cast<uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    put_str(out, k);
    put_str(out, v);
  }

  put_named(out, ckpt.params);
  put_named(out, ckpt.extra);

  out.push_back(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    out.push_back(o.config.kind == OptKind::adamw ? 1 : 0);
    put_f32(out, o.config.lr);
    put_f32(out, o.config.beta1);
    put_f32(out, o.config.beta2);
    put_f32(out, o.config.eps);
    put_f32(out, o.config.weight_decay);
    out.push_back(o.config.grad_clip ? 1 : 0);
    put_f32(out, o.config.grad_clip.value_or(0.f));
    put_u64(out, static_cast<uint64_t>(o.step_count));
    put_u32(out, static_cast<uint32_t>(o.first_moments.size()));
    for (size_t i = 0; i < o.first_moments.size(); ++i) {
      put_floats(out, o.first_moments[i]);
      put_floats(out, o.second_moments[i]);
    }
  }

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  size_t written = std::fwrite(out.data(), 1, out.size(), f);
  std::fclose(f);
  if (written != out.size()) throw std::runtime_error("save_checkpoint: short write to " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::fseek(f, 0, SEEK_END);
  long size = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<unsigned char> buf(static_cast<size_t>(size));
  size_t got = std::fread(buf.data(), 1, buf.size(), f);
  std::fclose(f);
  if (got != buf.size()) throw std::runtime_error("load_checkpoint: short read from " + path);

  Reader r{buf};
  r.need(4);
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
  r.pos = 4;
  uint32_t version = r.u32();
  if (version != CheckpointData::kFormatVersion)
    throw std::runtime_error("load_checkpoint: unsupported format version " + std::to_string(version));

  CheckpointData ckpt;
  uint32_t meta_count = r.u32();
  for (uint32_t i = 0; i < meta_count; ++i) {
    std::string k = r.str();
    ckpt.meta[k] = r.str();
  }
  ckpt.params = read_named(r);
  ckpt.extra = read_named(r);

  r.need(1);
  bool has_optim = buf[r.pos++] != 0;
  if (has_optim) {
    OptimizerSnapshot o;
    r.need(1);
    o.config.kind = buf[r.pos++] ? OptKind::adamw : OptKind::adam;
    o.config.lr = r.f32();
    o.config.beta1 = r.f32();
    o.config.beta2 = r.f32();
    o.config.eps = r.f32();
    o.config.weight_decay = r.f32();
    r.need(1);
    bool has_clip = buf[r.pos++] != 0;
    float clip = r.f32();
    if (has_clip) o.config.grad_clip = clip;
    o.step_count = static_cast<int64_t>(r.u64());
    uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
      o.first_moments.push_back(r.floats());
      o.second_moments.push_back(r.floats());
    }
    ckpt.optimizer = std::move(o);
  }
  return ckpt;
}

OptimizerSnapshot snapshot_optimizer(const Optimizer& opt) {
  OptimizerSnapshot o;
  o.config = opt.config();
  o.step_count = opt.step_count();
  o.first_moments = opt.first_moments();
  o.second_moments = opt.second_moments();
  return o;
}

}  // namespace longview
