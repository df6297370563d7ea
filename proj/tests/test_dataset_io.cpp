#include <doctest.h>

#include <json.hpp>

#include "dider/dataset_io.hpp"
#include "dider/errors.hpp"
#include "test_util.hpp"

using namespace dider;
namespace fs = std::filesystem;

namespace {

TrajectoryBatch two_samples() {
  SimConfig c;
  c.n_samples = 2;
  c.horizon = 12;
  return normalize(simulate(c, Rng(4)));
}

}  // namespace

TEST_CASE("round trip is bit-identical") {
  testutil::TempDir dir("io");
  const TrajectoryBatch b = two_samples();
  write_dataset(b, dir.path());
  CHECK(read_dataset(dir.path()) == b);
  const auto manifest = nlohmann::json::parse(testutil::slurp(dir / "manifest.json"));
  CHECK(manifest["shape"]["states"] == nlohmann::json::array({2, 12, 3, 4}));
  CHECK(fs::file_size(dir / "states.f32") == 2 * 12 * 3 * 4 * 4);
  CHECK(fs::file_size(dir / "edges.u8") == 2 * 12 * 6);
}

TEST_CASE("unlabelled batches round trip without an edges file") {
  testutil::TempDir dir("io");
  TrajectoryBatch b = two_samples();
  b.edge_labels.reset();
  write_dataset(b, dir.path());
  CHECK_FALSE(fs::exists(dir / "edges.u8"));
  CHECK(read_dataset(dir.path()) == b);
}

TEST_CASE("truncated payload is corrupt") {
  testutil::TempDir dir("io");
  write_dataset(two_samples(), dir.path());
  fs::resize_file(dir / "states.f32", 100);
  CHECK_THROWS_AS(read_dataset(dir.path()), CorruptDataError);
}

TEST_CASE("four byte mismatch names both sizes") {
  testutil::TempDir dir("io");
  write_dataset(two_samples(), dir.path());
  const auto size = fs::file_size(dir / "states.f32");
  fs::resize_file(dir / "states.f32", size - 4);
  try {
    read_dataset(dir.path());
    FAIL("expected CorruptDataError");
  } catch (const CorruptDataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(std::to_string(size - 4)) != std::string::npos);
    CHECK(msg.find(std::to_string(size)) != std::string::npos);
  }
}

TEST_CASE("truncated label file is corrupt") {
  testutil::TempDir dir("io");
  write_dataset(two_samples(), dir.path());
  fs::resize_file(dir / "edges.u8", 7);
  CHECK_THROWS_AS(read_dataset(dir.path()), CorruptDataError);
}

TEST_CASE("unknown version is rejected") {
  testutil::TempDir dir("io");
  write_dataset(two_samples(), dir.path());
  auto manifest = nlohmann::json::parse(testutil::slurp(dir / "manifest.json"));
  manifest["version"] = 99;
  std::ofstream(dir / "manifest.json") << manifest.dump();
  CHECK_THROWS_AS(read_dataset(dir.path()), VersionError);
}

TEST_CASE("garbage manifest is corrupt") {
  testutil::TempDir dir("io");
  write_dataset(two_samples(), dir.path());
  std::ofstream(dir / "manifest.json") << "{ not json";
  CHECK_THROWS_AS(read_dataset(dir.path()), CorruptDataError);
}
