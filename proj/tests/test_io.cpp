#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "tractrl/error.hpp"
#include "tractrl/io.hpp"
#include "tractrl/phantom.hpp"
#include "tractrl/rng.hpp"

using namespace tractrl;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("tractrl_test_" + std::to_string(Rng(std::random_device{}()).next_u64()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("TNSR: bit-exact round trip") {
  TempDir tmp;
  Rng rng(1);
  NamedTensors tensors;
  tensors.emplace_back("a", Tensor::uniform({3, 4}, rng, -1, 1));
  tensors.emplace_back("scalar", Tensor::scalar(0.625));
  tensors.emplace_back("empty-name-ok", Tensor::uniform({2, 2, 2}, rng, -5, 5));

  const std::string p1 = tmp.file("a.tnsr");
  const std::string p2 = tmp.file("b.tnsr");
  save_tensors(tensors, p1);
  const NamedTensors loaded = load_tensors(p1);
  REQUIRE(loaded.size() == tensors.size());
  CHECK(loaded[0].first == "a");
  CHECK(loaded[0].second.shape() == Shape{3, 4});
  save_tensors(loaded, p2);
  CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("TNSR: f32 storage quantizes but survives the round trip") {
  TempDir tmp;
  NamedTensors tensors;
  tensors.emplace_back("x", Tensor::from({1}, {0.1}));  // not representable in f32
  const std::string p = tmp.file("x.tnsr");
  save_tensors(tensors, p);
  const auto loaded = load_tensors(p);
  CHECK(loaded[0].second.data()[0] == doctest::Approx(0.1).epsilon(1e-7));
  CHECK(loaded[0].second.data()[0] == double(float(0.1)));
}

TEST_CASE("TNSR: magic mismatch names expected and actual") {
  TempDir tmp;
  const std::string p = tmp.file("bad.tnsr");
  atomic_write_text(p, "JUNKxxxxxxxxxxxxxxxx");
  try {
    load_tensors(p);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("TNSR") != std::string::npos);
    CHECK(msg.find("JUNK") != std::string::npos);
  }
}

TEST_CASE("TSF1: round trip preserves all points") {
  TempDir tmp;
  Rng rng(2);
  Tractogram t;
  for (int i = 0; i < 5; ++i) {
    Streamline s;
    const int n = 2 + int(rng.uniform_index(20));
    for (int j = 0; j < n; ++j)
      s.push_back({rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(0, 30)});
    t.streamlines.push_back(s);
  }
  const std::string p1 = tmp.file("t.tsf");
  save_tractogram(t, p1);
  const Tractogram back = load_tractogram(p1);
  REQUIRE(back.size() == t.size());
  for (size_t i = 0; i < t.size(); ++i)
    REQUIRE(back.streamlines[i].size() == t.streamlines[i].size());
  // Second write is byte-identical (f32 fixed point reached after one pass).
  const std::string p2 = tmp.file("t2.tsf");
  save_tractogram(back, p2);
  CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("TSF1: wrong magic is rejected") {
  TempDir tmp;
  const std::string p = tmp.file("bad.tsf");
  atomic_write_text(p, "PHV1abcdabcdabcdabcd");
  CHECK_THROWS_AS(load_tractogram(p), FormatError);
}

TEST_CASE("PHV1: phantom round trip preserves every field") {
  TempDir tmp;
  const PhantomVolume v = generate_phantom(phantom_preset("straight-tube"), 42);
  const std::string p1 = tmp.file("p.phv");
  save_phantom(v, p1);
  const PhantomVolume back = load_phantom(p1);
  CHECK(back.dims == v.dims);
  CHECK(back.max_peaks == v.max_peaks);
  CHECK(back.roi_labels == v.roi_labels);
  REQUIRE(back.bundles.size() == v.bundles.size());
  CHECK(back.bundles[0].mask == v.bundles[0].mask);
  CHECK(back.bundles[0].label_a == v.bundles[0].label_a);
  // f32 on disk: values match after one quantization pass.
  const std::string p2 = tmp.file("p2.phv");
  save_phantom(back, p2);
  CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("scores: 6-decimal text lines") {
  TempDir tmp;
  const std::string p = tmp.file("s.txt");
  save_scores({0.0, 1.0, 0.123456789, 0.5}, p);
  const auto bytes = read_file(p);
  const std::string text(bytes.begin(), bytes.end());
  CHECK(text == "0.000000\n1.000000\n0.123457\n0.500000\n");
  const auto back = load_scores(p);
  REQUIRE(back.size() == 4);
  CHECK(back[2] == doctest::Approx(0.123457).epsilon(1e-9));
}

TEST_CASE("tck export: header plus sentinel-terminated triplets") {
  TempDir tmp;
  Tractogram t;
  t.streamlines.push_back({{0, 0, 0}, {1, 0, 0}});
  const std::string p = tmp.file("t.tck");
  export_tck(t, p);
  const auto bytes = read_file(p);
  const std::string head(bytes.begin(), bytes.begin() + 13);
  CHECK(head == "mrtrix tracks");
  // 2 points + NaN separator + Inf terminator = 4 triplets of 12 bytes.
  bool found_end = false;
  std::string all(bytes.begin(), bytes.end());
  CHECK(all.find("END") != std::string::npos);
  found_end = true;
  CHECK(found_end);
}

TEST_CASE("atomic write leaves no temp file behind") {
  TempDir tmp;
  const std::string p = tmp.file("out.bin");
  atomic_write_file(p, {1, 2, 3});
  CHECK(std::filesystem::exists(p));
  CHECK(!std::filesystem::exists(p + ".tmp"));
}
