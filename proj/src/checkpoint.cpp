#include "fastdraw/checkpoint.hpp"

#include <array>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fastdraw/error.hpp"
#include "fastdraw/tensor_io.hpp"

namespace fastdraw {

namespace {

using nlohmann::json;
constexpr std::array<char, 4> kMagic = {'F', 'D', 'C', 'K'};

json arch_to_json(const nn::Architecture& a) {
  return {{"L", a.L},         {"enc0", a.enc0}, {"enc1", a.enc1},
          {"enc2", a.enc2},   {"dec1", a.dec1}, {"dec2", a.dec2},
          {"head_hidden", a.head_hidden}};
}

nn::Architecture arch_from_json(const json& j) {
  nn::Architecture a;
  a.L = j.at("L").get<int>();
  a.enc0 = j.at("enc0").get<int>();
  a.enc1 = j.at("enc1").get<int>();
  a.enc2 = j.at("enc2").get<int>();
  a.dec1 = j.at("dec1").get<int>();
  a.dec2 = j.at("dec2").get<int>();
  a.head_hidden = j.at("head_hidden").get<int>();
  return a;
}

RawTensor pack(const std::vector<float>& values, std::vector<std::uint32_t> dims, int L) {
  RawTensor t;
  t.dims = std::move(dims);
  t.L = static_cast<std::uint32_t>(L);
  t.data = values;
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const nn::MicroNet<float>& net,
                     const nn::AdamState<float>& opt, int epoch) {
  json manifest;
  manifest["format"] = "fastdraw-checkpoint";
  manifest["version"] = 1;
  manifest["L"] = net.L();
  manifest["epoch"] = epoch;
  manifest["arch"] = arch_to_json(net.arch());
  manifest["w_mask"] = net.w_mask;
  manifest["w_seq"] = net.w_seq;
  manifest["optimizer"] = {{"step", opt.step},         {"m_w_mask", opt.m_w_mask},
                           {"v_w_mask", opt.v_w_mask}, {"m_w_seq", opt.m_w_seq},
                           {"v_w_seq", opt.v_w_seq}};
  std::vector<RawTensor> tensors;
  json entries = json::array();
  const bool has_opt = opt.m_weight[0].size() == net.layers()[0].weight.size();
  manifest["optimizer"]["moments"] = has_opt;
  auto add = [&](const std::string& name, const std::vector<float>& v,
                 std::vector<std::uint32_t> dims) {
    entries.push_back({{"name", name}, {"shape", dims}});
    tensors.push_back(pack(v, std::move(dims), net.L()));
  };
  for (int pass = 0; pass < (has_opt ? 3 : 1); ++pass) {
    const std::string prefix = pass == 0 ? "" : (pass == 1 ? "adam.m." : "adam.v.");
    for (int l = 0; l < nn::kLayerCount; ++l) {
      const auto& layer = net.layers()[l];
      const std::vector<std::uint32_t> wdims = {static_cast<std::uint32_t>(layer.out_channels),
                                                static_cast<std::uint32_t>(layer.in_channels), 3u,
                                                3u};
      const std::vector<std::uint32_t> bdims = {static_cast<std::uint32_t>(layer.out_channels)};
      const auto& w = pass == 0 ? layer.weight : (pass == 1 ? opt.m_weight[l] : opt.v_weight[l]);
      const auto& b = pass == 0 ? layer.bias : (pass == 1 ? opt.m_bias[l] : opt.v_bias[l]);
      add(prefix + layer.name + ".weight", w, wdims);
      add(prefix + layer.name + ".bias", b, bdims);
    }
  }
  manifest["tensors"] = entries;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path + " for writing");
  const std::string text = manifest.dump();
  out.write(kMagic.data(), kMagic.size());
  const auto len = static_cast<std::uint32_t>(text.size());
  const unsigned char len_bytes[4] = {static_cast<unsigned char>(len & 0xff),
                                      static_cast<unsigned char>((len >> 8) & 0xff),
                                      static_cast<unsigned char>((len >> 16) & 0xff),
                                      static_cast<unsigned char>((len >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(len_bytes), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : tensors) write_tensor(out, t);
  if (!out) fail(ErrorCode::io, "failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open checkpoint " + path);
  std::array<char, 4> magic{};
  unsigned char len_bytes[4] = {};
  if (!in.read(magic.data(), 4) || magic != kMagic) {
    fail(ErrorCode::format, path + ": not a checkpoint (bad magic)");
  }
  if (!in.read(reinterpret_cast<char*>(len_bytes), 4)) fail(ErrorCode::format, "truncated checkpoint");
  const std::uint32_t len = len_bytes[0] | (len_bytes[1] << 8) | (len_bytes[2] << 16) |
                            (static_cast<std::uint32_t>(len_bytes[3]) << 24);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) fail(ErrorCode::format, "truncated checkpoint manifest");

  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("checkpoint manifest: ") + e.what());
  }
  Checkpoint ck;
  try {
    const auto arch = arch_from_json(manifest.at("arch"));
    ck.net = nn::MicroNet<float>(arch, 0);
    ck.net.w_mask = manifest.at("w_mask").get<double>();
    ck.net.w_seq = manifest.at("w_seq").get<double>();
    ck.epoch = manifest.value("epoch", -1);
    const auto& o = manifest.at("optimizer");
    const bool has_opt = o.value("moments", false);
    ck.optimizer = has_opt ? nn::AdamState<float>::zeros_like(ck.net) : nn::AdamState<float>{};
    ck.optimizer.step = o.at("step").get<std::int64_t>();
    ck.optimizer.m_w_mask = o.at("m_w_mask").get<double>();
    ck.optimizer.v_w_mask = o.at("v_w_mask").get<double>();
    ck.optimizer.m_w_seq = o.at("m_w_seq").get<double>();
    ck.optimizer.v_w_seq = o.at("v_w_seq").get<double>();

    const auto& entries = manifest.at("tensors");
    const std::size_t expected = static_cast<std::size_t>(nn::kLayerCount) * 2 * (has_opt ? 3 : 1);
    if (entries.size() != expected) fail(ErrorCode::format, "checkpoint tensor count mismatch");
    std::size_t e = 0;
    for (int pass = 0; pass < (has_opt ? 3 : 1); ++pass) {
      for (int l = 0; l < nn::kLayerCount; ++l) {
        auto& layer = ck.net.layers()[l];
        for (int part = 0; part < 2; ++part, ++e) {
          RawTensor t = read_tensor(in);
          auto& dst = part == 0 ? (pass == 0 ? layer.weight
                                             : (pass == 1 ? ck.optimizer.m_weight[l]
                                                          : ck.optimizer.v_weight[l]))
                                : (pass == 0 ? layer.bias
                                             : (pass == 1 ? ck.optimizer.m_bias[l]
                                                          : ck.optimizer.v_bias[l]));
          const auto shape = entries[e].at("shape").get<std::vector<std::uint32_t>>();
          if (t.dims != shape || t.data.size() != dst.size()) {
            fail(ErrorCode::shape, "checkpoint tensor " + entries[e].at("name").get<std::string>() +
                                       " does not match the architecture");
          }
          dst = std::move(t.data);
        }
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("checkpoint manifest: ") + e.what());
  }
  return ck;
}

}  // namespace fastdraw
