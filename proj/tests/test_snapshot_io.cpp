#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "siggame/snapshot_io.hpp"
#include "test_util.hpp"

using namespace siggame;

namespace {

PopulationSnapshot sample_snapshot() {
  PayoffTable table(GameSpec::with_probs({0.9, 0.1}));
  SimParams p;
  p.N = 7;
  p.T = 30;
  p.game = table.spec();
  p.master_seed = 99;
  auto snap = run_simulation(p, table).final;
  // Awkward values that must survive both encodings.
  snap.agents[0].strategy_weights[3] = std::numeric_limits<double>::denorm_min();
  snap.agents[1].strategy_weights[5] = 1e-300;
  snap.agents[2].link_weights[4] = 0.1 + 0.2;
  snap.agents[3].strategy_weights[0] = 0.0;
  return snap;
}

}  // namespace

TEST(SnapshotIo, BinaryRoundTripIsExact) {
  const auto snap = sample_snapshot();
  const auto bytes = encode_snapshot_binary(snap);
  const auto back = decode_snapshot_binary(bytes);
  EXPECT_EQ(back, snap);
  EXPECT_EQ(encode_snapshot_binary(back), bytes);
  EXPECT_EQ(bytes.substr(0, 8), "SGSNAP01");
  EXPECT_EQ(bytes.size(), 8u + 4 + 4 + 8 * 4 + 8 + 8 * 2 + 8 * 7 * (16 + 7));
}

TEST(SnapshotIo, TextRoundTripIsExact) {
  const auto snap = sample_snapshot();
  const auto text = encode_snapshot_text(snap);
  const auto back = decode_snapshot_text(text);
  EXPECT_EQ(back, snap);
  EXPECT_EQ(encode_snapshot_text(back), text);
  EXPECT_EQ(decode_snapshot(text), snap);
  EXPECT_EQ(decode_snapshot(encode_snapshot_binary(snap)), snap);
}

TEST(SnapshotIo, RejectsCorruptInput) {
  const auto bytes = encode_snapshot_binary(sample_snapshot());
  EXPECT_THROW(decode_snapshot_binary(bytes.substr(0, bytes.size() - 3)), IoError);
  EXPECT_THROW(decode_snapshot_binary(bytes + "x"), IoError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_snapshot_binary(bad_magic), IoError);
  auto bad_version = bytes;
  bad_version[8] = 2;
  EXPECT_THROW(decode_snapshot_binary(bad_version), IoError);
  auto self_link = sample_snapshot();
  auto raw = encode_snapshot_text(self_link);
  EXPECT_THROW(decode_snapshot_text("siggame-snapshot 2\n"), IoError);
  EXPECT_THROW(decode_snapshot_text(raw.substr(0, raw.size() / 2)), IoError);
}

TEST(SnapshotIo, FilesRoundTrip) {
  test::TempDir dir("snapio");
  const auto snap = sample_snapshot();
  write_snapshot(dir / "a.snap", snap);
  write_snapshot(dir / "a.txt", snap, SnapshotEncoding::Text);
  EXPECT_EQ(read_snapshot(dir / "a.snap"), snap);
  EXPECT_EQ(read_snapshot(dir / "a.txt"), snap);
  EXPECT_THROW(read_snapshot(dir / "missing.snap"), IoError);
  EXPECT_THROW(write_snapshot(dir / "no/such/dir/x.snap", snap), IoError);
}
