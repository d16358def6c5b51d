#include "dtnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "dtnet/errors.hpp"
#include "dtnet/rng.hpp"

namespace dtnet {

namespace {

constexpr double kInv255 = 1.0 / 255.0;

std::uint8_t quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  in.seekg(0, std::ios::end);
  const std::streamoff len = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(len));
  if (len > 0) in.read(reinterpret_cast<char*>(bytes.data()), len);
  if (!in) throw FormatError("short read from '" + path + "'");
  return bytes;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to '" + path + "'");
}

// --- synthetic glyph painter ----------------------------------------------

struct Painter {
  int h, w;
  double scale;  // canvas units are 1/16 of the image side
  double dx, dy;
  std::vector<double> mask;

  Painter(int h_, int w_, double jx, double jy)
      : h(h_), w(w_), scale(h_ / 16.0), dx(jx), dy(jy),
        mask(static_cast<std::size_t>(h_) * w_, 0.0) {}

  void box(double r0, double r1, double c0, double c1) {
    const int rr0 = std::max(0, static_cast<int>(std::lround((r0 + dy) * scale)));
    const int rr1 = std::min(h, static_cast<int>(std::lround((r1 + dy) * scale)));
    const int cc0 = std::max(0, static_cast<int>(std::lround((c0 + dx) * scale)));
    const int cc1 = std::min(w, static_cast<int>(std::lround((c1 + dx) * scale)));
    for (int r = rr0; r < rr1; ++r) {
      for (int c = cc0; c < cc1; ++c) mask[static_cast<std::size_t>(r) * w + c] = 1.0;
    }
  }

  void disk(double cr, double cc, double radius) {
    const double rr = (cr + dy) * scale, ccn = (cc + dx) * scale, rad = radius * scale;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double dr = r + 0.5 - rr, dc = c + 0.5 - ccn;
        if (dr * dr + dc * dc <= rad * rad) mask[static_cast<std::size_t>(r) * w + c] = 1.0;
      }
    }
  }

  // Band of given half-width around the segment (r0,c0)-(r1,c1).
  void stroke(double r0, double c0, double r1, double c1, double half_width) {
    const double ar = (r0 + dy) * scale, ac = (c0 + dx) * scale;
    const double br = (r1 + dy) * scale, bc = (c1 + dx) * scale;
    const double hw = half_width * scale;
    const double vr = br - ar, vc = bc - ac;
    const double len2 = vr * vr + vc * vc;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double pr = r + 0.5 - ar, pc = c + 0.5 - ac;
        double t = len2 > 0 ? std::clamp((pr * vr + pc * vc) / len2, 0.0, 1.0) : 0.0;
        const double dr = pr - t * vr, dc = pc - t * vc;
        if (dr * dr + dc * dc <= hw * hw) mask[static_cast<std::size_t>(r) * w + c] = 1.0;
      }
    }
  }

  // Filled triangle (row,col) vertices.
  void triangle(double r0, double c0, double r1, double c1, double r2, double c2) {
    const double ar = (r0 + dy) * scale, ac = (c0 + dx) * scale;
    const double br = (r1 + dy) * scale, bc = (c1 + dx) * scale;
    const double cr = (r2 + dy) * scale, cc = (c2 + dx) * scale;
    auto edge = [](double px, double py, double qx, double qy, double rx, double ry) {
      return (qx - px) * (ry - py) - (qy - py) * (rx - px);
    };
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double y = r + 0.5, x = c + 0.5;
        const double e0 = edge(ac, ar, bc, br, x, y);
        const double e1 = edge(bc, br, cc, cr, x, y);
        const double e2 = edge(cc, cr, ac, ar, x, y);
        const bool inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
        if (inside) mask[static_cast<std::size_t>(r) * w + c] = 1.0;
      }
    }
  }
};

// Glyphs are rotation-asymmetric so every 90-degree rotation of a sample is
// distinguishable, which keeps the rotation task learnable.
void paint_glyph(Painter& p, int cls) {
  switch (cls % 8) {
    case 0:  // L bracket
      p.box(3, 13, 3, 5);
      p.box(11, 13, 3, 12);
      break;
    case 1:  // tee
      p.box(3, 5, 3, 13);
      p.box(3, 13, 7, 9);
      break;
    case 2:  // J hook
      p.box(3, 13, 11, 13);
      p.box(11, 13, 4, 13);
      break;
    case 3:  // dot over baseline
      p.disk(5, 5, 2.2);
      p.box(11, 13, 3, 13);
      break;
    case 4:  // wedge pointing right
      p.triangle(3, 3, 13, 3, 8, 12);
      break;
    case 5:  // stem with offset dot
      p.box(6, 13, 7, 9);
      p.disk(4, 5, 1.7);
      break;
    case 6:  // zigzag
      p.box(3, 5, 3, 13);
      p.box(11, 13, 3, 13);
      p.stroke(5, 11, 11, 5, 1.1);
      break;
    default:  // open bracket
      p.box(3, 12, 3, 5);
      p.box(3, 12, 11, 13);
      p.box(10, 12, 3, 13);
      break;
  }
}

}  // namespace

ImageBatch Dataset::batch(int start, int count) const {
  if (start < 0 || count < 0 || start + count > size()) {
    throw ContractError("Dataset::batch: range [" + std::to_string(start) + "," +
                        std::to_string(start + count) + ") out of bounds for " +
                        std::to_string(size()) + " samples");
  }
  ImageBatch b;
  const std::size_t per = static_cast<std::size_t>(channels) * height * width;
  std::vector<double> vals(static_cast<std::size_t>(count) * per);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    vals[i] = pixels[static_cast<std::size_t>(start) * per + i] * kInv255;
  }
  b.pixels = Tensor::from({count, channels, height, width}, std::move(vals));
  b.labels_main.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    b.labels_main.push_back(labels[static_cast<std::size_t>(start + i)]);
  }
  b.labels_aux.assign(static_cast<std::size_t>(count), 0);
  return b;
}

double sigma_for_severity(int severity) {
  static const double table[5] = {0.04, 0.06, 0.08, 0.09, 0.10};
  if (severity < 1 || severity > 5) {
    throw ConfigError("severity must be in 1..5, got " + std::to_string(severity));
  }
  return table[severity - 1];
}

double CorruptionSpec::effective_sigma() const {
  return sigma >= 0.0 ? sigma : sigma_for_severity(severity);
}

Dataset synth_dataset(const SynthSpec& spec) {
  if (spec.num_classes < 1 || spec.num_classes > 8) {
    throw ConfigError("synth_dataset supports 1..8 classes, got " +
                      std::to_string(spec.num_classes));
  }
  if (spec.height != spec.width) {
    throw ConfigError("synth_dataset images must be square");
  }
  if (!(spec.margin > 0.0 && spec.margin <= 1.0)) {
    throw ConfigError("synth_dataset margin must be in (0,1]");
  }
  Dataset d;
  d.height = spec.height;
  d.width = spec.width;
  d.channels = spec.channels;
  d.num_classes = spec.num_classes;
  const std::size_t per = static_cast<std::size_t>(d.channels) * d.height * d.width;
  d.pixels.resize(static_cast<std::size_t>(spec.num_samples) * per);
  d.labels.resize(static_cast<std::size_t>(spec.num_samples));

  for (int i = 0; i < spec.num_samples; ++i) {
    Rng r(mix_seed(spec.seed, 0x53594e54ULL, static_cast<std::uint64_t>(i)));
    const int cls = i % spec.num_classes;
    d.labels[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(cls);

    const double jx = r.uniform(-1.5, 1.5);
    const double jy = r.uniform(-1.5, 1.5);
    Painter painter(d.height, d.width, jx, jy);
    paint_glyph(painter, cls);

    for (int c = 0; c < d.channels; ++c) {
      const double bg = 0.08 + 0.10 * r.uniform();
      const double color = 0.55 + 0.45 * r.uniform();
      const double fg = bg + (0.95 - bg) * spec.margin * color;
      std::uint8_t* out = d.pixels.data() + static_cast<std::size_t>(i) * per +
                          static_cast<std::size_t>(c) * d.height * d.width;
      for (int px = 0; px < d.height * d.width; ++px) {
        const double m = painter.mask[static_cast<std::size_t>(px)];
        out[px] = quantize(bg + m * (fg - bg));
      }
    }
  }
  return d;
}

Dataset load_cifar_binary(const std::string& path, CifarVariant variant) {
  const auto bytes = read_file(path);
  const std::size_t record = variant == CifarVariant::Cifar10 ? 3073 : 3074;
  const std::size_t label_bytes = record - 3072;
  if (bytes.size() % record != 0) {
    const std::size_t offset = (bytes.size() / record) * record;
    throw FormatError("truncated record in '" + path + "' at byte offset " +
                      std::to_string(offset) + " (" +
                      std::to_string(bytes.size() - offset) + " trailing bytes, record size " +
                      std::to_string(record) + ")");
  }
  const std::size_t n = bytes.size() / record;
  Dataset d;
  d.height = 32;
  d.width = 32;
  d.channels = 3;
  d.num_classes = variant == CifarVariant::Cifar10 ? 10 : 100;
  d.pixels.resize(n * 3072);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * record;
    if (variant == CifarVariant::Cifar10) {
      if (rec[0] > 9) {
        throw FormatError("label " + std::to_string(rec[0]) + " out of range at byte offset " +
                          std::to_string(i * record));
      }
      d.labels[i] = rec[0];
    } else {
      if (rec[0] > 19 || rec[1] > 99) {
        throw FormatError("label bytes (" + std::to_string(rec[0]) + "," +
                          std::to_string(rec[1]) + ") out of range at byte offset " +
                          std::to_string(i * record));
      }
      d.labels[i] = rec[1];  // fine label
    }
    // Channel planes are already [C,H,W] row-major.
    std::memcpy(d.pixels.data() + i * 3072, rec + label_bytes, 3072);
  }
  return d;
}

void save_cifar_binary(const std::string& path, const Dataset& data,
                       CifarVariant variant) {
  if (data.height != 32 || data.width != 32 || data.channels != 3) {
    throw ContractError("save_cifar_binary requires 3x32x32 samples");
  }
  std::vector<std::uint8_t> bytes;
  const std::size_t record = variant == CifarVariant::Cifar10 ? 3073 : 3074;
  bytes.reserve(static_cast<std::size_t>(data.size()) * record);
  for (int i = 0; i < data.size(); ++i) {
    const std::uint16_t label = data.labels[static_cast<std::size_t>(i)];
    if (variant == CifarVariant::Cifar10) {
      if (label > 9) throw ContractError("label out of range for the cifar10 layout");
      bytes.push_back(static_cast<std::uint8_t>(label));
    } else {
      if (label > 99) throw ContractError("label out of range for the cifar100 layout");
      bytes.push_back(0);  // coarse label is not stored in Dataset
      bytes.push_back(static_cast<std::uint8_t>(label));
    }
    const std::uint8_t* px = data.pixels.data() + static_cast<std::size_t>(i) * 3072;
    bytes.insert(bytes.end(), px, px + 3072);
  }
  write_file(path, bytes);
}

Dataset load_dtc1(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 20 || std::memcmp(bytes.data(), "DTC1", 4) != 0) {
    throw FormatError("'" + path + "' is not a DTC1 file");
  }
  const std::uint32_t n = get_u32(bytes.data() + 4);
  const std::uint32_t h = get_u32(bytes.data() + 8);
  const std::uint32_t w = get_u32(bytes.data() + 12);
  const std::uint32_t c = get_u32(bytes.data() + 16);
  const std::size_t expected = 20 + static_cast<std::size_t>(n) * h * w * c +
                               static_cast<std::size_t>(n) * 2;
  if (bytes.size() != expected) {
    throw FormatError("DTC1 size mismatch in '" + path + "': header implies " +
                      std::to_string(expected) + " bytes, file has " +
                      std::to_string(bytes.size()));
  }
  Dataset d;
  d.height = static_cast<int>(h);
  d.width = static_cast<int>(w);
  d.channels = static_cast<int>(c);
  d.pixels.resize(static_cast<std::size_t>(n) * h * w * c);
  d.labels.resize(n);
  const std::uint8_t* px = bytes.data() + 20;
  // File stores [N,H,W,C]; memory stores [N,C,H,W].
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t r = 0; r < h; ++r) {
      for (std::uint32_t col = 0; col < w; ++col) {
        for (std::uint32_t ch = 0; ch < c; ++ch) {
          d.pixels[((static_cast<std::size_t>(i) * c + ch) * h + r) * w + col] =
              px[((static_cast<std::size_t>(i) * h + r) * w + col) * c + ch];
        }
      }
    }
  }
  const std::uint8_t* lb = bytes.data() + 20 + static_cast<std::size_t>(n) * h * w * c;
  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    d.labels[i] = static_cast<std::uint16_t>(lb[2 * i] | (lb[2 * i + 1] << 8));
    max_label = std::max(max_label, static_cast<int>(d.labels[i]));
  }
  d.num_classes = n > 0 ? max_label + 1 : 0;
  return d;
}

void save_dtc1(const std::string& path, const Dataset& data) {
  std::vector<std::uint8_t> bytes;
  bytes.insert(bytes.end(), {'D', 'T', 'C', '1'});
  put_u32(bytes, static_cast<std::uint32_t>(data.size()));
  put_u32(bytes, static_cast<std::uint32_t>(data.height));
  put_u32(bytes, static_cast<std::uint32_t>(data.width));
  put_u32(bytes, static_cast<std::uint32_t>(data.channels));
  const int h = data.height, w = data.width, c = data.channels;
  for (int i = 0; i < data.size(); ++i) {
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        for (int ch = 0; ch < c; ++ch) {
          bytes.push_back(
              data.pixels[((static_cast<std::size_t>(i) * c + ch) * h + r) * w + col]);
        }
      }
    }
  }
  for (int i = 0; i < data.size(); ++i) {
    const std::uint16_t l = data.labels[static_cast<std::size_t>(i)];
    bytes.push_back(static_cast<std::uint8_t>(l & 0xff));
    bytes.push_back(static_cast<std::uint8_t>(l >> 8));
  }
  write_file(path, bytes);
}

ImageBatch corrupt(const ImageBatch& batch, const CorruptionSpec& spec,
                   std::uint64_t seed, std::int64_t sample_index_base) {
  const double sigma = spec.effective_sigma();
  ImageBatch out;
  out.labels_main = batch.labels_main;
  out.labels_aux = batch.labels_aux;
  out.pixels = batch.pixels.clone();
  if (sigma == 0.0) return out;
  const int n = batch.size();
  const std::size_t per = batch.pixels.numel() / static_cast<std::size_t>(n);
  double* px = out.pixels.data();
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, 0x434f5252ULL,
                     static_cast<std::uint64_t>(sample_index_base + i)));
    double* sample = px + static_cast<std::size_t>(i) * per;
    for (std::size_t j = 0; j < per; ++j) {
      sample[j] = std::clamp(sample[j] + sigma * rng.normal(), 0.0, 1.0);
    }
  }
  return out;
}

ImageBatch rotate90(const ImageBatch& batch, const std::vector<int>& k) {
  const int n = batch.size();
  if (static_cast<int>(k.size()) != n) {
    throw ContractError("rotate90: need one rotation per sample");
  }
  const int c = batch.pixels.dim(1), h = batch.pixels.dim(2), w = batch.pixels.dim(3);
  if (h != w) {
    throw ContractError("rotate90: images must be square, got " + std::to_string(h) +
                        "x" + std::to_string(w));
  }
  ImageBatch out;
  out.labels_main = batch.labels_main;
  out.labels_aux = batch.labels_aux;
  out.pixels = Tensor::zeros(batch.pixels.shape());
  const double* src = batch.pixels.data();
  double* dst = out.pixels.data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    const int ki = ((k[static_cast<std::size_t>(i)] % 4) + 4) % 4;
    for (int ch = 0; ch < c; ++ch) {
      const double* s = src + (static_cast<std::size_t>(i) * c + ch) * plane;
      double* t = dst + (static_cast<std::size_t>(i) * c + ch) * plane;
      for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
          double v;
          switch (ki) {
            case 0: v = s[static_cast<std::size_t>(r) * w + col]; break;
            case 1: v = s[static_cast<std::size_t>(col) * w + (w - 1 - r)]; break;
            case 2: v = s[static_cast<std::size_t>(h - 1 - r) * w + (w - 1 - col)]; break;
            default: v = s[static_cast<std::size_t>(h - 1 - col) * w + r]; break;
          }
          t[static_cast<std::size_t>(r) * w + col] = v;
        }
      }
    }
  }
  return out;
}

ImageBatch rotate_and_label(const ImageBatch& batch, std::uint64_t seed,
                            std::int64_t sample_index_base) {
  const int n = batch.size();
  std::vector<int> ks(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, 0x524f5441ULL,
                     static_cast<std::uint64_t>(sample_index_base + i)));
    ks[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(4));
  }
  ImageBatch out = rotate90(batch, ks);
  out.labels_aux = ks;
  return out;
}

void split_train_val(const Dataset& data, double fraction, std::uint64_t seed,
                     Dataset& train, Dataset& val) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("split fraction must be in (0,1)");
  }
  const int n = data.size();
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(mix_seed(seed, 0x53504c54ULL));
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  const int n_train = static_cast<int>(std::floor(n * fraction));
  auto take = [&](int lo, int hi, Dataset& out) {
    out.height = data.height;
    out.width = data.width;
    out.channels = data.channels;
    out.num_classes = data.num_classes;
    out.pixels.clear();
    out.labels.clear();
    const std::size_t per = static_cast<std::size_t>(data.channels) * data.height * data.width;
    for (int i = lo; i < hi; ++i) {
      const int src = perm[static_cast<std::size_t>(i)];
      const std::uint8_t* p = data.pixels.data() + static_cast<std::size_t>(src) * per;
      out.pixels.insert(out.pixels.end(), p, p + per);
      out.labels.push_back(data.labels[static_cast<std::size_t>(src)]);
    }
  };
  take(0, n_train, train);
  take(n_train, n, val);
}

}  // namespace dtnet
