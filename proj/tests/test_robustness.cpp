#include <doctest.h>

#include <filesystem>
#include <random>

#include "stegowav/robustness.hpp"
#include "test_support.hpp"

using namespace stegowav;

namespace {

Spectrogram ramp(Index bins, Index frames) {
  Spectrogram s;
  s.magnitude = RowMatrix<double>(bins, frames);
  s.phase = RowMatrix<double>(bins, frames);
  for (Index f = 0; f < bins; ++f) {
    for (Index t = 0; t < frames; ++t) {
      s.magnitude(f, t) = 1.0 + f + 0.01 * t;
      s.phase(f, t) = 0.1 * (f - t);
    }
  }
  return s;
}

bool column_zero(const Spectrogram& s, Index t) { return s.magnitude.col(t).isZero(0.0); }

}  // namespace

TEST_CASE("keeping every frame changes nothing") {
  const Spectrogram s = ramp(8, 32);
  for (DropoutMode mode : {DropoutMode::sequential, DropoutMode::random}) {
    const Spectrogram out = apply_frame_dropout(s, DropoutSpec{1.0, mode, 3, 0});
    CHECK(out.magnitude == s.magnitude);
    CHECK(out.phase == s.phase);
  }
}

TEST_CASE("sequential dropout zeroes the trailing frames") {
  const Spectrogram s = ramp(8, 32);
  const Spectrogram out = apply_frame_dropout(s, DropoutSpec{0.5, DropoutMode::sequential, 0, 0});
  for (Index t = 0; t < 16; ++t) CHECK(out.magnitude.col(t) == s.magnitude.col(t));
  for (Index t = 16; t < 32; ++t) CHECK(column_zero(out, t));
  CHECK(out.phase == s.phase);

  const auto shifted = dropped_frame_indices(32, DropoutSpec{0.75, DropoutMode::sequential, 0, 4});
  REQUIRE(shifted.size() == 8);
  CHECK(shifted.front() == 20);
  CHECK(shifted.back() == 27);
  CHECK_THROWS_AS(dropped_frame_indices(32, DropoutSpec{0.75, DropoutMode::sequential, 0, 30}), UsageError);
}

TEST_CASE("random dropout is seeded and exact in count") {
  const DropoutSpec spec{0.25, DropoutMode::random, 17, 0};
  const auto a = dropped_frame_indices(40, spec);
  CHECK(a == dropped_frame_indices(40, spec));
  CHECK(a.size() == 30);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  DropoutSpec other = spec;
  other.seed = 18;
  CHECK(a != dropped_frame_indices(40, other));

  const Spectrogram s = ramp(4, 40);
  const Spectrogram once = apply_frame_dropout(s, spec);
  const Spectrogram twice = apply_frame_dropout(once, spec);
  CHECK(once.magnitude == twice.magnitude);
  Index zeroed = 0;
  for (Index t = 0; t < 40; ++t) zeroed += column_zero(once, t);
  CHECK(zeroed == 30);
}

TEST_CASE("dropped frame counts round half away from zero") {
  CHECK(DropoutSpec{0.75, DropoutMode::sequential, 0, 0}.dropped_frames(10) == 3);  // 2.5
  CHECK(DropoutSpec{0.125, DropoutMode::sequential, 0, 0}.dropped_frames(32) == 28);
}

TEST_CASE("invalid dropout specs are rejected") {
  for (double p : {0.0, -0.5, 1.5}) CHECK_THROWS_AS(DropoutSpec({p, DropoutMode::random, 0, 0}).validate(), UsageError);
  CHECK_THROWS_AS(DropoutSpec({0.5, DropoutMode::random, 0, -1}).validate(), UsageError);
  CHECK_THROWS_AS(parse_dropout_mode("burst"), UsageError);
  CHECK(parse_dropout_mode("random") == DropoutMode::random);
  CHECK(to_string(DropoutMode::sequential) == "sequential");
}

TEST_CASE("dropping frames of one replica column halves its share under an identity reveal") {
  std::mt19937_64 rng(5);
  const EmbeddingContext ctx = EmbeddingContext::make(EmbeddingMethod::replicate, 4, 4, true);
  REQUIRE(ctx.grid.cols == 2);
  Tape tape;
  const Var w = tape.constant(stegowav::testing::random_tensor(rng, ctx.watermark_shape()));
  Spectrogram s;
  s.magnitude = encode_arrange(w, ctx).value().plane(0);
  s.phase = RowMatrix<double>::Zero(s.magnitude.rows(), s.magnitude.cols());

  const Index T = s.magnitude.cols();
  const DropoutSpec spec{0.75, DropoutMode::sequential, 0, 0};
  const auto dropped = dropped_frame_indices(T, spec);
  REQUIRE(dropped.front() >= ctx.grid.cell_w);

  const Spectrogram hit = apply_frame_dropout(s, spec);
  const Var out = decode_finalize(decode_prepare(tape.constant(Tensor::from_plane(hit.magnitude)), ctx), ctx);
  Plane expected = w.value().plane(0);
  for (Index t : dropped) expected.col(t - ctx.grid.cell_w) *= 0.5;
  CHECK((out.value().plane(0) - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("robustness sweep rows") {
  PipelineConfig cfg;
  const ModelBundle m = ModelBundle::create(cfg);
  const Dataset data = synth_dataset(2, Profile::desk, 1);
  SweepOptions opts;
  opts.fractions = {1.0, 0.5, 0.25};
  const auto rows = robustness_sweep(m, data, opts);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].mode == DropoutMode::sequential);
  CHECK(rows[3].mode == DropoutMode::random);
  CHECK(rows[4].keep_fraction == 0.5);
  CHECK(rows[0].method == "replicate");

  const Evaluation ev = evaluate(data, m);
  CHECK(std::abs(rows[0].mean_ssim - ev.mean.ssim) < 1e-12);
  CHECK(std::abs(rows[3].mean_psnr_db - ev.mean.psnr_db) < 1e-12);

  const std::string csv = robustness_csv(rows);
  CHECK(csv.starts_with(RobustnessRow::csv_header() + "\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(robustness_csv(robustness_sweep(m, data, opts)) == csv);
}

TEST_CASE("sweep dumps revealed images on request") {
  const ModelBundle m = ModelBundle::create(PipelineConfig{});
  const Dataset data = synth_dataset(1, Profile::desk, 2);
  const std::string dir = (std::filesystem::temp_directory_path() / "stegowav_test_dumps").string();
  std::filesystem::remove_all(dir);
  SweepOptions opts;
  opts.fractions = {0.5};
  opts.modes = {DropoutMode::random};
  opts.dump_dir = dir;
  robustness_sweep(m, data, opts);
  CHECK(std::filesystem::exists(dir + "/random_keep0.5000_000.ppm"));
  std::filesystem::remove_all(dir);
}
