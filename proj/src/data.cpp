#include "pclmp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "pclmp/binio.hpp"
#include "pclmp/error.hpp"
#include "pclmp/rng.hpp"

namespace pclmp {

namespace {

constexpr char kXpclMagic[4] = {'X', 'P', 'C', 'L'};

Vec random_unit(Rng& rng, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(d);
  for (double& x : v) x = g(rng);
  return l2_normalize(v);
}

// Rows of a random orthogonal matrix via Gram-Schmidt on Gaussian rows.
Matrix random_orthogonal(Rng& rng, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix q(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    Vec r(d);
    for (double& x : r) x = g(rng);
    for (std::size_t j = 0; j < i; ++j) {
      const double p = dot(r, q.row(j));
      for (std::size_t k = 0; k < d; ++k) r[k] -= p * q(j, k);
    }
    q.set_row(i, l2_normalize(r));
  }
  return q;
}

struct ModalityTransform {
  Matrix rotation;
  Vec offset;
  double shift = 0.0;

  // (1 - s) x + s (Q x + o); the identity map when s = 0.
  Vec apply(std::span<const double> x) const {
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double qx = dot(rotation.row(i), x);
      y[i] = (1.0 - shift) * x[i] + shift * (qx + offset[i]);
    }
    return y;
  }
};

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && s[b] == ' ') ++b;
  return s.substr(b);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& msg) {
  throw Error(Errc::ParseError, "line " + std::to_string(line) + ": " + msg);
}

template <typename T>
T parse_number(const std::string& s, std::size_t line, const char* what) {
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) parse_fail(line, std::string("bad ") + what + " '" + s + "'");
  return value;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) parse_fail(1, "missing header");
  const auto header = split_csv(trim(line));
  if (header.size() < 3 || header[0] != "id" || header[1] != "modality")
    parse_fail(1, "header must be id,modality,f0,...");
  const std::size_t dim = header.size() - 2;
  for (std::size_t j = 0; j < dim; ++j)
    if (header[j + 2] != "f" + std::to_string(j)) parse_fail(1, "unexpected feature column '" + header[j + 2] + "'");

  Dataset data;
  data.dim = dim;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != dim + 2)
      throw Error(Errc::DimMismatch, "line " + std::to_string(lineno) + ": expected " + std::to_string(dim + 2) +
                                         " columns, got " + std::to_string(cells.size()));
    FeatureRecord rec;
    const int id = parse_number<int>(cells[0], lineno, "id");
    if (id < -1) parse_fail(lineno, "id must be >= -1");
    if (id >= 0) rec.true_id = id;
    if (cells[1] == "V") {
      rec.modality = Modality::Visible;
    } else if (cells[1] == "R") {
      rec.modality = Modality::Infrared;
    } else {
      parse_fail(lineno, "modality must be V or R, got '" + cells[1] + "'");
    }
    rec.raw.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      rec.raw[j] = parse_number<double>(cells[j + 2], lineno, "feature");
      if (!std::isfinite(rec.raw[j])) parse_fail(lineno, "non-finite feature");
    }
    data.records.push_back(std::move(rec));
  }
  return data;
}

Dataset load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  char magic[4] = {};
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kXpclMagic))
    throw Error(Errc::ParseError, "offset 0: bad magic, expected XPCL");
  const auto count = binio::get_le<std::uint32_t>(in, "record count");
  const auto dim = binio::get_le<std::uint32_t>(in, "dimension");
  if (dim == 0) throw Error(Errc::ParseError, "offset 8: dimension must be positive");
  Dataset data;
  data.dim = dim;
  data.records.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    FeatureRecord rec;
    const auto offset = static_cast<long long>(in.tellg());
    const auto mod = binio::get_le<std::uint8_t>(in, "modality");
    if (mod > 1) throw Error(Errc::ParseError, "offset " + std::to_string(offset) + ": modality byte must be 0 or 1");
    rec.modality = static_cast<Modality>(mod);
    const auto id = binio::get_le<std::int32_t>(in, "true_id");
    if (id >= 0) rec.true_id = id;
    rec.raw.resize(dim);
    for (auto& x : rec.raw) x = binio::get_f32(in, "feature");
    data.records.push_back(std::move(rec));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(Errc::ParseError, "trailing bytes after " + std::to_string(count) + " records");
  return data;
}

void check_dims(const Dataset& data) {
  for (const auto& r : data.records)
    if (r.raw.size() != data.dim) throw Error(Errc::DimMismatch, "record dimension differs from dataset dimension");
}

}  // namespace

std::vector<std::size_t> Dataset::indices_of(Modality m) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].modality == m) out.push_back(i);
  return out;
}

Dataset Dataset::without_ground_truth() const {
  Dataset out = *this;
  for (auto& r : out.records) r.true_id.reset();
  return out;
}

void SynthConfig::validate() const {
  if (n_identities < 2) throw Error(Errc::InvalidConfig, "n_identities must be >= 2");
  if (d_in < 1) throw Error(Errc::InvalidConfig, "d_in must be >= 1");
  if (samples_per_id_per_modality < 1) throw Error(Errc::InvalidConfig, "samples_per_id_per_modality must be >= 1");
  if (!(intra_id_spread > 0.0)) throw Error(Errc::InvalidConfig, "intra_id_spread must be > 0");
  if (!(modality_shift >= 0.0) || !std::isfinite(modality_shift))
    throw Error(Errc::InvalidConfig, "modality_shift must be finite and >= 0");
  if (!(noise_fraction >= 0.0 && noise_fraction < 1.0)) throw Error(Errc::InvalidConfig, "noise_fraction must be in [0,1)");
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(cfg.d_in);
  const auto n_id = static_cast<std::size_t>(cfg.n_identities);
  const auto per = static_cast<std::size_t>(cfg.samples_per_id_per_modality);

  Rng anchor_rng = make_rng({cfg.seed, stream::kSynthAnchors});
  std::vector<Vec> anchors;
  anchors.reserve(n_id);
  for (std::size_t i = 0; i < n_id; ++i) anchors.push_back(random_unit(anchor_rng, d));

  Rng transform_rng = make_rng({cfg.seed, stream::kSynthTransform});
  ModalityTransform transform;
  transform.rotation = random_orthogonal(transform_rng, d);
  transform.offset = random_unit(transform_rng, d);
  transform.shift = cfg.modality_shift;

  const std::size_t total = n_id * per * 2;
  std::vector<char> distractor(total, 0);
  const auto n_distract = static_cast<std::size_t>(std::llround(cfg.noise_fraction * static_cast<double>(total)));
  Rng distract_rng = make_rng({cfg.seed, stream::kSynthDistractors});
  if (n_distract > 0) {
    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;
    for (std::size_t i = 0; i < n_distract; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, total - 1);
      std::swap(order[i], order[pick(distract_rng)]);
      distractor[order[i]] = 1;
    }
  }

  Rng noise_rng = make_rng({cfg.seed, stream::kSynthNoise});
  std::normal_distribution<double> noise(0.0, cfg.intra_id_spread);
  Dataset data;
  data.dim = d;
  data.records.reserve(total);
  for (std::size_t id = 0; id < n_id; ++id) {
    for (Modality m : {Modality::Visible, Modality::Infrared}) {
      for (std::size_t s = 0; s < per; ++s) {
        const std::size_t idx = data.records.size();
        FeatureRecord rec;
        rec.modality = m;
        Vec anchor = anchors[id];
        if (distractor[idx]) {
          anchor = random_unit(distract_rng, d);
        } else {
          rec.true_id = static_cast<int>(id);
        }
        rec.raw = m == Modality::Visible ? anchor : transform.apply(anchor);
        for (double& x : rec.raw) x += noise(noise_rng);
        data.records.push_back(std::move(rec));
      }
    }
  }
  return data;
}

FeatureFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? FeatureFormat::Csv : FeatureFormat::XpclBinary;
}

Dataset load_features(const std::filesystem::path& path, FeatureFormat format) {
  Dataset data = format == FeatureFormat::Csv ? load_csv(path) : load_binary(path);
  check_dims(data);
  return data;
}

void save_features(const Dataset& data, const std::filesystem::path& path, FeatureFormat format) {
  check_dims(data);
  if (format == FeatureFormat::Csv) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
    out << "id,modality";
    for (std::size_t j = 0; j < data.dim; ++j) out << ",f" << j;
    out << '\n';
    char buf[32];
    for (const auto& r : data.records) {
      out << (r.true_id ? *r.true_id : -1) << ',' << (r.modality == Modality::Visible ? 'V' : 'R');
      for (double x : r.raw) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << ',' << buf;
      }
      out << '\n';
    }
    if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(kXpclMagic, 4);
  binio::put_le(out, static_cast<std::uint32_t>(data.records.size()));
  binio::put_le(out, static_cast<std::uint32_t>(data.dim));
  for (const auto& r : data.records) {
    binio::put_le(out, static_cast<std::uint8_t>(r.modality));
    binio::put_le(out, static_cast<std::int32_t>(r.true_id ? *r.true_id : -1));
    for (double x : r.raw) binio::put_f32(out, x);
  }
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

std::vector<std::size_t> pk_sample(std::span<const int> labels, BatchSpec spec, std::uint64_t seed, int epoch,
                                   std::uint64_t step, std::uint64_t stream_tag) {
  if (spec.P < 2 || spec.K < 1) throw Error(Errc::InvalidParams, "batch spec needs P >= 2 and K >= 1");
  std::map<int, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kNoise) clusters[labels[i]].push_back(i);
  const auto P = static_cast<std::size_t>(spec.P);
  const auto K = static_cast<std::size_t>(spec.K);
  if (clusters.size() < P)
    throw Error(Errc::InsufficientClusters,
                std::to_string(clusters.size()) + " clusters available, batch needs " + std::to_string(P));

  std::vector<const std::vector<std::size_t>*> pool;
  pool.reserve(clusters.size());
  for (const auto& [label, members] : clusters) pool.push_back(&members);

  Rng rng = make_rng({seed, stream::kBatch, static_cast<std::uint64_t>(epoch), step, stream_tag});
  for (std::size_t i = 0; i < P; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }

  std::vector<std::size_t> out;
  out.reserve(P * K);
  for (std::size_t c = 0; c < P; ++c) {
    std::vector<std::size_t> members = *pool[c];
    if (members.size() >= K) {
      for (std::size_t i = 0; i < K; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, members.size() - 1);
        std::swap(members[i], members[pick(rng)]);
        out.push_back(members[i]);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      for (std::size_t i = 0; i < K; ++i) out.push_back(members[pick(rng)]);
    }
  }
  return out;
}

}  // namespace pclmp
