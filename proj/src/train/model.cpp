#include "longview/train/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace longview::train {

std::string BackboneSpec::to_string() const {
  std::ostringstream os;
  for (size_t i = 0; i < stages.size(); ++i) {
    if (i) os << ",";
    os << stages[i].first << ":" << stages[i].second;
  }
  return os.str();
}

BackboneSpec BackboneSpec::parse(const std::string& stages_str, int kernel, int embedding_dim) {
  BackboneSpec spec;
  spec.stages.clear();
  spec.kernel = kernel;
  spec.embedding_dim = embedding_dim;
  std::istringstream is(stages_str);
  std::string item;
  while (std::getline(is, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("BackboneSpec: bad stage entry '" + item + "'");
    spec.stages.emplace_back(std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1)));
  }
  if (spec.stages.empty()) throw std::invalid_argument("BackboneSpec: no stages in '" + stages_str + "'");
  return spec;
}

ConvBackbone::ConvBackbone(const BackboneSpec& spec, uint64_t seed) : spec_(spec) {
  Rng rng(hash_mix(seed, 0xBBULL));
  int in_ch = 3;
  for (size_t i = 0; i < spec.stages.size(); ++i) {
    auto [out_ch, stride] = spec.stages[i];
    (void)stride;
    int fan_in = in_ch * spec.kernel * spec.kernel;
    float std_w = std::sqrt(2.f / static_cast<float>(fan_in));
    params_.emplace_back("conv" + std::to_string(i) + ".weight",
                         Tensor::randn({out_ch, in_ch, spec.kernel, spec.kernel}, rng, std_w, true));
    params_.emplace_back("conv" + std::to_string(i) + ".bias", Tensor::zeros({out_ch}, true));
    in_ch = out_ch;
  }
  float std_p = std::sqrt(1.f / static_cast<float>(in_ch));
  params_.emplace_back("proj.weight",
                       Tensor::randn({in_ch, spec.embedding_dim}, rng, std_p, true));
  params_.emplace_back("proj.bias", Tensor::zeros({spec.embedding_dim}, true));
}

TensorPtr ConvBackbone::forward(const TensorPtr& images) const {
  if (images->rank() != 4 || images->dim(1) != 3)
    throw std::invalid_argument("ConvBackbone: input must be (N,3,S,S), got " +
                                shape_str(images->shape));
  TensorPtr x = images;
  int pad = spec_.kernel / 2;
  for (size_t i = 0; i < spec_.stages.size(); ++i) {
    const auto& w = params_[2 * i].second;
    const auto& b = params_[2 * i + 1].second;
    x = relu(conv2d(x, w, b, spec_.stages[i].second, pad));
  }
  if (x->dim(2) != x->dim(3))
    throw std::invalid_argument("ConvBackbone: non-square feature map " + shape_str(x->shape) +
                                "; input must be square");
  if (x->dim(2) > 1) x = avgpool2d(x, x->dim(2), x->dim(2));
  const auto& pw = params_[params_.size() - 2].second;
  const auto& pb = params_[params_.size() - 1].second;
  return linear(x, pw, pb);
}

namespace {
void load_by_prefix(NamedTensors& dst, const NamedTensors& source, const std::string& prefix) {
  for (auto& [name, t] : dst) {
    std::string full = prefix + name;
    bool found = false;
    for (const auto& [sname, st] : source) {
      if (sname != full) continue;
      if (!same_shape(st->shape, t->shape))
        throw std::invalid_argument("load_params: shape mismatch for '" + full + "': " +
                                    shape_str(st->shape) + " vs " + shape_str(t->shape));
      t->data = st->data;
      found = true;
      break;
    }
    if (!found) throw std::invalid_argument("load_params: missing parameter '" + full + "'");
  }
}
}  // namespace

void ConvBackbone::load_params(const NamedTensors& source, const std::string& prefix) {
  load_by_prefix(params_, source, prefix);
}

LinearHead::LinearHead(int in_dim, int out_dim, uint64_t seed, bool zero_init) : out_dim_(out_dim) {
  if (zero_init) {
    params_.emplace_back("weight", Tensor::zeros({in_dim, out_dim}, true));
  } else {
    Rng rng(hash_mix(seed, 0x4EADULL));
    float std_w = std::sqrt(1.f / static_cast<float>(in_dim));
    params_.emplace_back("weight", Tensor::randn({in_dim, out_dim}, rng, std_w, true));
  }
  params_.emplace_back("bias", Tensor::zeros({out_dim}, true));
}

TensorPtr LinearHead::forward(const TensorPtr& x) const {
  return linear(x, params_[0].second, params_[1].second);
}

void LinearHead::load_params(const NamedTensors& source, const std::string& prefix) {
  load_by_prefix(params_, source, prefix);
  out_dim_ = params_[0].second->shape[1];
}

MlpHead::MlpHead(int in_dim, int hidden_dim, int out_dim, uint64_t seed) : out_dim_(out_dim) {
  Rng rng(hash_mix(seed, 0x3417ULL));
  float std1 = std::sqrt(2.f / static_cast<float>(in_dim));
  float std2 = std::sqrt(1.f / static_cast<float>(hidden_dim));
  params_.emplace_back("fc1.weight", Tensor::randn({in_dim, hidden_dim}, rng, std1, true));
  params_.emplace_back("fc1.bias", Tensor::zeros({hidden_dim}, true));
  params_.emplace_back("fc2.weight", Tensor::randn({hidden_dim, out_dim}, rng, std2, true));
  params_.emplace_back("fc2.bias", Tensor::zeros({out_dim}, true));
}

TensorPtr MlpHead::forward(const TensorPtr& x) const {
  auto h = relu(linear(x, params_[0].second, params_[1].second));
  return linear(h, params_[2].second, params_[3].second);
}

void MlpHead::load_params(const NamedTensors& source, const std::string& prefix) {
  load_by_prefix(params_, source, prefix);
  out_dim_ = params_[2].second->shape[1];
}

TensorPtr images_to_batch(const std::vector<Image>& frames) {
  if (frames.empty()) throw std::invalid_argument("images_to_batch: empty batch");
  const int h = frames[0].height, w = frames[0].width;
  for (const auto& f : frames)
    if (f.height != h || f.width != w)
      throw std::invalid_argument("images_to_batch: mixed frame sizes in batch");
  const int n = static_cast<int>(frames.size());
  std::vector<float> data(static_cast<size_t>(n) * 3 * h * w);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          data[((static_cast<size_t>(i) * 3 + c) * h + y) * w + x] = frames[i].at(y, x, c);
  return Tensor::create({n, 3, h, w}, std::move(data));
}

NamedTensors prefixed(const std::string& prefix, const NamedTensors& params) {
  NamedTensors out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.emplace_back(prefix + name, t);
  return out;
}

void set_requires_grad(NamedTensors& params, bool rg) {
  for (auto& [name, t] : params) t->set_requires_grad(rg);
}

NamedTensors clone_params(const NamedTensors& params) {
  NamedTensors out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) {
    auto copy = Tensor::create(t->shape, t->data);
    out.emplace_back(name, copy);
  }
  return out;
}

uint64_t params_hash(const NamedTensors& params) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& [name, t] : params) {
    h = fnv1a(name.data(), name.size(), h);
    h = fnv1a(t->data.data(), t->data.size() * sizeof(float), h);
  }
  return h;
}

}  // namespace longview::train
