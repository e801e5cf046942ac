#include <doctest.h>

#include <filesystem>
#include <functional>
#include <map>
#include <fstream>
#include <random>
#include <set>

#include "pclmp/clustering.hpp"
#include "pclmp/data.hpp"
#include "pclmp/error.hpp"

using namespace pclmp;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "pclmp_test_data";
  fs::create_directories(dir);
  return dir / name;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::EmptyInput;
}

Matrix normalized_raw(const Dataset& d, Modality m) {
  const auto idx = d.indices_of(m);
  Matrix out(idx.size(), d.dim);
  for (std::size_t i = 0; i < idx.size(); ++i) out.set_row(i, l2_normalize(d.records[idx[i]].raw));
  return out;
}

std::vector<int> ids_of(const Dataset& d, Modality m) {
  std::vector<int> out;
  for (auto i : d.indices_of(m)) out.push_back(d.records[i].true_id.value_or(-1));
  return out;
}

}  // namespace

TEST_CASE("generator is deterministic per seed") {
  SynthConfig cfg;
  cfg.n_identities = 5;
  cfg.samples_per_id_per_modality = 3;
  cfg.noise_fraction = 0.2;
  const Dataset a = generate_synthetic(cfg), b = generate_synthetic(cfg);
  REQUIRE(a.records.size() == 30);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].raw == b.records[i].raw);
    CHECK(a.records[i].true_id == b.records[i].true_id);
    CHECK(a.records[i].modality == b.records[i].modality);
  }
  cfg.seed += 1;
  CHECK(generate_synthetic(cfg).records[0].raw != a.records[0].raw);
}

TEST_CASE("distractors lose their identity") {
  SynthConfig cfg;
  cfg.n_identities = 10;
  cfg.samples_per_id_per_modality = 10;
  cfg.noise_fraction = 0.1;
  const Dataset d = generate_synthetic(cfg);
  std::size_t unknown = 0;
  for (const auto& r : d.records) unknown += !r.true_id;
  CHECK(unknown == 20);
}

TEST_CASE("zero shift: modalities coincide and DBSCAN finds one cluster per identity") {
  SynthConfig cfg;
  cfg.n_identities = 2;
  cfg.samples_per_id_per_modality = 4;
  cfg.intra_id_spread = 0.01;
  cfg.modality_shift = 0.0;
  const Dataset d = generate_synthetic(cfg);
  for (Modality m : {Modality::Visible, Modality::Infrared}) {
    const auto a = dbscan(normalized_raw(d, m), 0.1, 2);
    CHECK(a.n_clusters == 2);
    CHECK(adjusted_rand_index(a.labels, ids_of(d, m)) == 1.0);
  }
}

TEST_CASE("shrinking spread with zero shift makes paired modalities converge") {
  double prev = 1e9;
  for (double sigma : {0.1, 0.01, 0.001}) {
    SynthConfig cfg;
    cfg.n_identities = 3;
    cfg.samples_per_id_per_modality = 2;
    cfg.intra_id_spread = sigma;
    cfg.modality_shift = 0.0;
    const Dataset d = generate_synthetic(cfg);
    double worst = 0.0;
    for (std::size_t id = 0; id < 3; ++id) {
      const auto& v = d.records[id * 4].raw;
      const auto& r = d.records[id * 4 + 2].raw;
      worst = std::max(worst, euclidean_dist(v, r));
    }
    CHECK(worst < prev);
    prev = worst;
  }
  CHECK(prev < 0.02);
}

TEST_CASE("benchmark dataset clusters well per modality on raw features") {
  // Regression snapshot: values observed once from generator + DBSCAN.
  SynthConfig cfg;
  cfg.n_identities = 50;
  cfg.samples_per_id_per_modality = 16;
  cfg.intra_id_spread = 0.05;
  cfg.modality_shift = 0.5;
  cfg.seed = 7;
  const Dataset d = generate_synthetic(cfg);
  REQUIRE(d.records.size() == 1600);
  const double ari_v = adjusted_rand_index(dbscan(normalized_raw(d, Modality::Visible), 0.6, 4).labels,
                                           ids_of(d, Modality::Visible));
  const double ari_r = adjusted_rand_index(dbscan(normalized_raw(d, Modality::Infrared), 0.6, 4).labels,
                                           ids_of(d, Modality::Infrared));
  CHECK(ari_v > 0.9);
  CHECK(ari_r > 0.9);
  CHECK(ari_v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ari_r == doctest::Approx(0.978704).epsilon(1e-5));
}

TEST_CASE("invalid synthetic configs are rejected") {
  SynthConfig cfg;
  cfg.n_identities = 1;
  CHECK(code_of([&] { generate_synthetic(cfg); }) == Errc::InvalidConfig);
  cfg = {};
  cfg.intra_id_spread = 0.0;
  CHECK(code_of([&] { generate_synthetic(cfg); }) == Errc::InvalidConfig);
  cfg = {};
  cfg.noise_fraction = 1.0;
  CHECK(code_of([&] { generate_synthetic(cfg); }) == Errc::InvalidConfig);
}

TEST_CASE("CSV loading") {
  const auto p = temp_path("one.csv");
  std::ofstream(p) << "id,modality,f0,f1\n3,V,1.0,0.0\n";
  const Dataset d = load_features(p, FeatureFormat::Csv);
  REQUIRE(d.records.size() == 1);
  CHECK(d.dim == 2);
  CHECK(d.records[0].modality == Modality::Visible);
  CHECK(d.records[0].true_id == 3);
  CHECK(d.records[0].raw == Vec{1.0, 0.0});

  std::ofstream(p) << "id,modality,f0,f1\n-1,R,1.0,2.0\n";
  const Dataset u = load_features(p, FeatureFormat::Csv);
  CHECK(!u.records[0].true_id);
  CHECK(u.records[0].modality == Modality::Infrared);
}

TEST_CASE("CSV errors report the line") {
  const auto p = temp_path("bad.csv");
  std::ofstream(p) << "id,modality,f0,f1\n3,V,1.0,0.0\n4,X,1.0,0.0\n";
  try {
    load_features(p, FeatureFormat::Csv);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::ofstream(p) << "id,modality,f0,f1\n3,V,1.0\n";
  CHECK(code_of([&] { load_features(p, FeatureFormat::Csv); }) == Errc::DimMismatch);
  std::ofstream(p) << "id,modality,f0,f1\n3,V,abc,1\n";
  CHECK(code_of([&] { load_features(p, FeatureFormat::Csv); }) == Errc::ParseError);
}

TEST_CASE("binary loading rejects a bad magic") {
  const auto p = temp_path("bad.xpcl");
  std::ofstream(p, std::ios::binary) << "XPCX\x01\0\0\0\x02\0\0\0";
  CHECK(code_of([&] { load_features(p, FeatureFormat::XpclBinary); }) == Errc::ParseError);
}

TEST_CASE("binary layout is little-endian as documented") {
  Dataset d;
  d.dim = 1;
  d.records.push_back({{1.0}, Modality::Infrared, 7});
  const auto p = temp_path("layout.xpcl");
  save_features(d, p, FeatureFormat::XpclBinary);
  std::ifstream in(p, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  const std::vector<unsigned char> expected = {'X', 'P', 'C', 'L', 1, 0, 0, 0, 1, 0, 0, 0, 1, 7, 0, 0, 0, 0, 0, 0x80, 0x3f};
  CHECK(bytes == expected);
}

TEST_CASE("write then load round-trips 100 random records") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> id(-1, 20);
  Dataset d;
  d.dim = 6;
  for (int i = 0; i < 100; ++i) {
    FeatureRecord r;
    r.raw.resize(6);
    for (auto& x : r.raw) x = g(rng);
    r.modality = i % 3 ? Modality::Visible : Modality::Infrared;
    const int t = id(rng);
    if (t >= 0) r.true_id = t;
    d.records.push_back(r);
  }
  for (auto fmt : {FeatureFormat::XpclBinary, FeatureFormat::Csv}) {
    const auto p = temp_path(fmt == FeatureFormat::Csv ? "rt.csv" : "rt.xpcl");
    save_features(d, p, fmt);
    const Dataset back = load_features(p, fmt);
    REQUIRE(back.records.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
      CHECK(back.records[i].modality == d.records[i].modality);
      CHECK(back.records[i].true_id == d.records[i].true_id);
      for (std::size_t j = 0; j < 6; ++j)
        CHECK(back.records[i].raw[j] == doctest::Approx(d.records[i].raw[j]).epsilon(1e-7));
    }
  }
}

TEST_CASE("pk_sample") {
  SUBCASE("small clusters are sampled with replacement") {
    const std::vector<int> labels{0, 1};
    const auto idx = pk_sample(labels, {2, 3}, 1, 0, 0);
    REQUIRE(idx.size() == 6);
    std::map<std::size_t, int> count;
    for (auto i : idx) ++count[i];
    CHECK(count[0] == 3);
    CHECK(count[1] == 3);
  }
  SUBCASE("all noise") {
    const std::vector<int> labels(10, kNoise);
    CHECK(code_of([&] { pk_sample(labels, {2, 2}, 1, 0, 0); }) == Errc::InsufficientClusters);
  }
  SUBCASE("16 x 16 on 50 clusters") {
    std::vector<int> labels;
    for (int c = 0; c < 50; ++c)
      for (int s = 0; s < 16; ++s) labels.push_back(c);
    labels.push_back(kNoise);
    const auto idx = pk_sample(labels, {16, 16}, 3, 2, 5);
    CHECK(idx.size() == 256);
    std::set<int> distinct;
    std::set<std::size_t> positions;
    for (auto i : idx) {
      distinct.insert(labels[i]);
      positions.insert(i);
      CHECK(labels[i] != kNoise);
    }
    CHECK(distinct.size() == 16);
    CHECK(positions.size() == 256);  // clusters of size 16 are drawn without replacement
    CHECK(idx == pk_sample(labels, {16, 16}, 3, 2, 5));
    CHECK(idx != pk_sample(labels, {16, 16}, 3, 2, 6));
  }
}

TEST_CASE("pk_sample never returns noise on random labelings") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 50; ++t) {
    std::uniform_int_distribution<int> lab(-1, 6);
    std::vector<int> labels(40);
    for (auto& l : labels) l = lab(rng);
    try {
      for (auto i : pk_sample(labels, {3, 5}, t, 1, 2)) CHECK(labels[i] != kNoise);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InsufficientClusters);
    }
  }
}
