#include "icepose/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "icepose/crc32.hpp"
#include "icepose/errors.hpp"

namespace icepose {

using autodiff::Tensor;

namespace {

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::vector<unsigned char>& buf, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((u >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open checkpoint: " + path);
  }

  void bytes(void* dst, std::streamsize n) {
    if (!in_.read(static_cast<char*>(dst), n))
      throw IoError("truncated checkpoint: " + path_);
  }

  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  double f64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t u = 0;
    for (int i = 7; i >= 0; --i) u = (u << 8) | b[i];
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, const ViTConfig& config,
                     const ViTParams& params) {
  config.validate();
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kCheckpointMagic, kCheckpointMagic + 8);
  put_u32(buf, kCheckpointVersion);
  for (int v : {config.image_h, config.image_w, config.patch, config.embed_dim, config.depth,
                config.heads, config.mlp_ratio})
    put_u32(buf, static_cast<std::uint32_t>(v));

  std::uint32_t count = 0;
  for_each_param(params, [&](const std::string&, const Tensor&) { ++count; });
  put_u32(buf, count);

  for_each_param(params, [&](const std::string& name, const Tensor& t) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    put_u32(buf, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
    const size_t data_start = buf.size();
    for (Eigen::Index i = 0; i < t.size(); ++i) put_f64(buf, t[i]);
    put_u32(buf, crc32(buf.data() + data_start, buf.size() - data_start));
  });

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader in(path);
  char magic[8];
  in.bytes(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IoError("bad magic in checkpoint: " + path);
  if (in.u32() != kCheckpointVersion)
    throw IoError("unsupported checkpoint version in: " + path);

  Checkpoint ckpt;
  ViTConfig& c = ckpt.config;
  c.image_h = static_cast<int>(in.u32());
  c.image_w = static_cast<int>(in.u32());
  c.patch = static_cast<int>(in.u32());
  c.embed_dim = static_cast<int>(in.u32());
  c.depth = static_cast<int>(in.u32());
  c.heads = static_cast<int>(in.u32());
  c.mlp_ratio = static_cast<int>(in.u32());
  c.validate();

  // Zero-shaped parameters give the expected name/shape schema to load into.
  ckpt.params = init_params(c, 0);
  std::uint32_t expected = 0;
  for_each_param(ckpt.params, [&](const std::string&, const Tensor&) { ++expected; });
  if (in.u32() != expected)
    throw IoError("checkpoint tensor count does not match its config: " + path);

  for_each_param(ckpt.params, [&](const std::string& name, Tensor& t) {
    const std::uint32_t name_len = in.u32();
    std::string stored(name_len, '\0');
    in.bytes(stored.data(), name_len);
    if (stored != name)
      throw IoError("checkpoint tensor `" + stored + "` does not match expected `" + name +
                    "`");
    const std::uint32_t rank = in.u32();
    if (rank != static_cast<std::uint32_t>(t.rank()))
      throw IoError("checkpoint tensor `" + name + "` has unexpected rank");
    for (int d = 0; d < t.rank(); ++d)
      if (in.u32() != static_cast<std::uint32_t>(t.dim(d)))
        throw IoError("checkpoint tensor `" + name + "` has unexpected shape");
    std::vector<unsigned char> raw(static_cast<size_t>(t.size()) * 8);
    in.bytes(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.u32() != crc32(raw.data(), raw.size()))
      throw IoError("checkpoint tensor `" + name + "` failed its CRC-32 check");
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      std::uint64_t u = 0;
      for (int k = 7; k >= 0; --k) u = (u << 8) | raw[static_cast<size_t>(i) * 8 + k];
      double v;
      std::memcpy(&v, &u, 8);
      t[i] = v;
    }
    if (!t.all_finite())
      throw IoError("checkpoint tensor `" + name + "` contains non-finite values");
  });
  return ckpt;
}

}  // namespace icepose
