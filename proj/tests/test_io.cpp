#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>

#include "dkt/gradcheck.hpp"
#include "dkt/io.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dkt_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

dkt::VideoClip sample_clip() {
  dkt::SynthConfig cfg;
  cfg.frames = 3;
  cfg.height = cfg.width = 8;
  cfg.channels = 2;
  dkt::Rng rng(1);
  return dkt::render_action(4, rng, cfg);
}

std::uint64_t read_u64(const std::string& s, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

}  // namespace

TEST(ClipFormat, HeaderLayout) {
  auto c = sample_clip();
  auto bytes = dkt::encode_clip(c, 8);
  ASSERT_EQ(bytes.substr(0, 4), "DKVC");
  EXPECT_EQ(read_u64(bytes, 4), 1u);
  EXPECT_EQ(read_u64(bytes, 12), 8u);
  EXPECT_EQ(read_u64(bytes, 20), 3u);
  EXPECT_EQ(read_u64(bytes, 28), 8u);
  EXPECT_EQ(read_u64(bytes, 36), 8u);
  EXPECT_EQ(read_u64(bytes, 44), 2u);
  EXPECT_EQ(read_u64(bytes, 52), 4u);
  EXPECT_EQ(bytes.size(), 60 + c.pixels.size() * 4);
}

TEST(ClipFormat, RoundTripIsBitExact) {
  auto c = sample_clip();
  auto d = dkt::decode_clip(dkt::encode_clip(c, 8));
  EXPECT_EQ(d.num_classes, 8u);
  EXPECT_EQ(d.clip.pixels, c.pixels);
  EXPECT_EQ(d.clip.label, c.label);
  EXPECT_EQ(dkt::encode_clip(d.clip, 8), dkt::encode_clip(c, 8));
}

TEST(ClipFormat, RejectsCorruptInput) {
  auto bytes = dkt::encode_clip(sample_clip(), 8);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(dkt::decode_clip(bad_magic), dkt::FormatError);
  EXPECT_THROW(dkt::decode_clip(bytes.substr(0, bytes.size() - 1)), dkt::FormatError);
  EXPECT_THROW(dkt::decode_clip(bytes + "x"), dkt::FormatError);
  auto bad_label = sample_clip();
  bad_label.label = 9;
  EXPECT_THROW(dkt::decode_clip(dkt::encode_clip(bad_label, 8)), dkt::FormatError);
  auto bad_pixel = sample_clip();
  bad_pixel.pixels[3] = 1.5f;
  EXPECT_THROW(dkt::decode_clip(dkt::encode_clip(bad_pixel, 8)), dkt::FormatError);
}

TEST(Manifest, RoundTripAndErrors) {
  std::vector<dkt::ManifestEntry> e{{"clips/a.dkvc", dkt::Domain::source, 3}, {"clips/b.dkvc", dkt::Domain::target, 0}};
  auto text = dkt::format_manifest(e);
  EXPECT_EQ(text, "clips/a.dkvc src 3\nclips/b.dkvc tgt 0\n");
  auto back = dkt::parse_manifest(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].domain, dkt::Domain::target);
  EXPECT_THROW(dkt::parse_manifest("a.dkvc day 1\n"), dkt::FormatError);
  EXPECT_THROW(dkt::parse_manifest("a.dkvc src\n"), dkt::FormatError);
  EXPECT_THROW(dkt::parse_manifest("a.dkvc src -1\n"), dkt::FormatError);
}

TEST(DatasetFiles, RoundTrip) {
  dkt::SynthConfig cfg;
  cfg.num_classes = 3;
  cfg.train_per_class = 2;
  cfg.test_per_class = 1;
  cfg.frames = 3;
  cfg.height = cfg.width = 8;
  auto ds = dkt::make_dataset(cfg);
  auto dir = scratch("dataset");
  dkt::write_dataset(dir, ds);
  auto lines = [&](const char* f) {
    auto t = dkt::detail::read_file(dir / f);
    return static_cast<std::size_t>(std::count(t.begin(), t.end(), '\n'));
  };
  EXPECT_EQ(lines(dkt::kTrainManifest) + lines(dkt::kTestManifest),
            2 * ds.train.size() + ds.test_source.size() + ds.test_target.size());
  auto back = dkt::read_dataset(dir);
  EXPECT_EQ(back.num_classes, 3u);
  ASSERT_EQ(back.train.size(), ds.train.size());
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    EXPECT_EQ(back.train[i].source.pixels, ds.train[i].source.pixels);
    EXPECT_EQ(back.train[i].target.pixels, ds.train[i].target.pixels);
    EXPECT_EQ(back.train[i].target.domain, dkt::Domain::target);
  }
  ASSERT_EQ(back.test_target.size(), ds.test_target.size());
  EXPECT_EQ(back.test_target[0].pixels, ds.test_target[0].pixels);
  fs::remove_all(dir);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto m = dkt::tiny_gradcheck_config().model_config();
  auto p = dkt::ModelParams<double>::init(m, 3);
  dkt::Rng rng(4);
  dkt::detail::perturb_parameters(p, rng, 1.0);
  auto bytes = dkt::encode_checkpoint(dkt::make_checkpoint(p, "seed = 1\n"));
  ASSERT_EQ(bytes.substr(0, 4), "DKTF");
  auto ck = dkt::decode_checkpoint(bytes);
  EXPECT_EQ(ck.config_text, "seed = 1\n");
  auto q = dkt::ModelParams<double>::init(m, 99);
  dkt::load_parameters(q, ck);
  auto a = p.named(), b = q.named();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].tensor.to_vector(), b[i].tensor.to_vector()) << a[i].name;
  EXPECT_EQ(dkt::encode_checkpoint(dkt::make_checkpoint(q, "seed = 1\n")), bytes);
}

TEST(Checkpoint, FileRoundTrip) {
  auto m = dkt::tiny_gradcheck_config().model_config();
  auto p = dkt::ModelParams<double>::init(m, 5);
  auto dir = scratch("ckpt");
  dkt::write_checkpoint(dir / "c.dktf", dkt::make_checkpoint(p, "x"));
  EXPECT_EQ(dkt::encode_checkpoint(dkt::read_checkpoint(dir / "c.dktf")),
            dkt::encode_checkpoint(dkt::make_checkpoint(p, "x")));
  fs::remove_all(dir);
}

TEST(Checkpoint, MismatchedModelIsRejected) {
  auto m = dkt::tiny_gradcheck_config().model_config();
  auto ck = dkt::make_checkpoint(dkt::ModelParams<double>::init(m, 1), "");
  auto other = m;
  other.clip.dim = 4;
  auto q = dkt::ModelParams<double>::init(other, 1);
  EXPECT_THROW(dkt::load_parameters(q, ck), dkt::FormatError);
  other = m;
  other.qkv = dkt::QkvSharing::split;
  auto r = dkt::ModelParams<double>::init(other, 1);
  EXPECT_THROW(dkt::load_parameters(r, ck), dkt::FormatError);
}

TEST(Checkpoint, RejectsCorruptInput) {
  auto m = dkt::tiny_gradcheck_config().model_config();
  auto bytes = dkt::encode_checkpoint(dkt::make_checkpoint(dkt::ModelParams<double>::init(m, 1), "cfg"));
  EXPECT_THROW(dkt::decode_checkpoint(bytes.substr(0, bytes.size() - 3)), dkt::FormatError);
  EXPECT_THROW(dkt::decode_checkpoint(bytes + std::string(1, '\0')), dkt::FormatError);
  auto bad = bytes;
  bad[4] = 7;
  EXPECT_THROW(dkt::decode_checkpoint(bad), dkt::FormatError);
}

TEST(Checkpoint, FloatModelStoresWidenedValues) {
  auto m = dkt::tiny_gradcheck_config().model_config();
  auto pf = dkt::ModelParams<float>::init(m, 2);
  auto ck = dkt::make_checkpoint(pf, "");
  auto back = dkt::ModelParams<float>::init(m, 3);
  dkt::load_parameters(back, ck);
  EXPECT_EQ(back.head_w.to_vector(), pf.head_w.to_vector());
}
