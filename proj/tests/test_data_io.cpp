#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "lift/checkpoint.hpp"
#include "lift/dataset.hpp"
#include "lift/io.hpp"

using lift::Tensor;

namespace {

std::vector<uint8_t> crafted_record(uint8_t label, uint8_t fill) {
  std::vector<uint8_t> rec(3073, fill);
  rec[0] = label;
  return rec;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("a crafted record with label 7 and saturated pixels parses exactly") {
  auto samples = lift::read_cifar(crafted_record(7, 255), lift::CifarVariant::cifar10);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].label == 7);
  for (float v : samples[0].image.data()) CHECK(v == 1.0f);
  CHECK(samples[0].image.shape() == lift::Shape{3, 32, 32});
}

TEST_CASE("an empty file parses to an empty dataset") {
  CHECK(lift::read_cifar({}, lift::CifarVariant::cifar10).empty());
}

TEST_CASE("concatenated records preserve order") {
  auto bytes = crafted_record(1, 10);
  auto second = crafted_record(3, 20);
  bytes.insert(bytes.end(), second.begin(), second.end());
  auto samples = lift::read_cifar(bytes, lift::CifarVariant::cifar10);
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].label == 1);
  CHECK(samples[1].label == 3);
}

TEST_CASE("truncated records and out-of-range labels are typed errors") {
  std::vector<uint8_t> bytes(3072, 0);
  try {
    lift::read_cifar(bytes, lift::CifarVariant::cifar10);
    FAIL("expected truncation error");
  } catch (const lift::Error& e) {
    CHECK(e.code() == lift::ErrorCode::Truncated);
  }
  try {
    lift::read_cifar(crafted_record(10, 0), lift::CifarVariant::cifar10);
    FAIL("expected label error");
  } catch (const lift::Error& e) {
    CHECK(e.code() == lift::ErrorCode::LabelOutOfRange);
  }
}

TEST_CASE("gen_synthetic is a pure function of seed, n, and K") {
  auto a = lift::gen_synthetic(123, 20, 8);
  auto b = lift::gen_synthetic(123, 20, 8);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].image.data() == b[i].image.data());
  }
  auto c = lift::gen_synthetic(124, 20, 8);
  bool any_diff = false;
  for (size_t i = 0; i < a.size(); ++i) any_diff = any_diff || a[i].image.data() != c[i].image.data();
  CHECK(any_diff);
}

TEST_CASE("labels are balanced within +-10 for K=2, n=100") {
  auto samples = lift::gen_synthetic(7, 100, 2);
  int count0 = 0;
  for (const auto& s : samples) count0 += s.label == 0 ? 1 : 0;
  CHECK(count0 >= 40);
  CHECK(count0 <= 60);
}

TEST_CASE("the stamped motif region matches the class motif exactly") {
  auto samples = lift::gen_synthetic(99, 6, 8);
  for (const auto& s : samples) {
    const auto motif = lift::motif_pattern(s.label);
    bool found = false;
    for (int oy = 0; oy <= 32 - 5 && !found; oy += 4)
      for (int ox = 0; ox <= 32 - 5 && !found; ox += 4) {
        bool match = true;
        for (int ch = 0; ch < 3 && match; ++ch)
          for (int y = 0; y < 5 && match; ++y)
            for (int x = 0; x < 5 && match; ++x) {
              const float expect = static_cast<float>(lift::motif_byte(motif, y, x)) / 255.0f;
              match = s.image.at({ch, oy + y, ox + x}) == expect;
            }
        found = match;
      }
    CHECK(found);
  }
}

TEST_CASE("motif table holds sixteen distinct patterns and no more") {
  for (int a = 0; a < 16; ++a)
    for (int b = a + 1; b < 16; ++b) CHECK(lift::motif_pattern(a) != lift::motif_pattern(b));
  CHECK_THROWS_AS(lift::motif_pattern(16), lift::Error);
  CHECK_THROWS_AS(lift::gen_synthetic(1, 10, 17), lift::Error);
}

TEST_CASE("sample records round-trip bit-exactly through the byte framing") {
  auto samples = lift::gen_synthetic(5, 10, 8);
  auto bytes = lift::write_samples(samples);
  auto back = lift::read_samples(bytes, 8);
  REQUIRE(back.size() == samples.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].label == samples[i].label);
    CHECK(back[i].image.data() == samples[i].image.data());
  }
}

TEST_CASE("channel normalization centers the dataset") {
  auto samples = lift::gen_synthetic(11, 50, 4);
  auto stats = lift::channel_stats(samples);
  lift::normalize_samples(samples, stats);
  auto post = lift::channel_stats(samples);
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(std::abs(post.mean[ch]) < 1e-4);
    CHECK(post.stddev[ch] == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("tensor files round-trip bit-exactly") {
  lift::Rng rng(1);
  std::vector<float> d(24);
  for (auto& v : d) v = static_cast<float>(rng.normal());
  auto t = Tensor<float>::from_data({2, 3, 4}, d);
  auto bytes = lift::write_tensor_bytes(t);
  auto back = lift::read_tensor_bytes(bytes);
  CHECK(back.shape() == t.shape());
  CHECK(back.data() == t.data());

  const auto path = temp_path("lift_roundtrip.lift");
  lift::write_tensor_file(path, t);
  auto from_disk = lift::read_tensor_file(path);
  CHECK(from_disk.data() == t.data());
  std::remove(path.c_str());
}

TEST_CASE("corrupt tensor headers raise distinct typed errors") {
  auto bytes = lift::write_tensor_bytes(Tensor<float>::full({2, 2}, 1.5f));
  auto expect_code = [](std::vector<uint8_t> b, lift::ErrorCode code) {
    try {
      lift::read_tensor_bytes(b);
      FAIL("expected error");
    } catch (const lift::Error& e) {
      CHECK(e.code() == code);
    }
  };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_code(bad_magic, lift::ErrorCode::BadMagic);
  auto bad_version = bytes;
  bad_version[4] = 9;
  expect_code(bad_version, lift::ErrorCode::BadVersion);
  auto bad_dtype = bytes;
  bad_dtype[5] = 7;
  expect_code(bad_dtype, lift::ErrorCode::BadDtype);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  expect_code(truncated, lift::ErrorCode::Truncated);
  auto trailing = bytes;
  trailing.push_back(0);
  expect_code(trailing, lift::ErrorCode::Truncated);
}

TEST_CASE("checkpoints restore the exact parameter set") {
  lift::ModelConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 4;
  cfg.embed_dim = 12;
  cfg.depth = 2;
  cfg.num_heads = 3;
  cfg.num_classes = 4;
  cfg = cfg.with_qkv_mode(lift::QkvMode::life);
  auto model = lift::VitModel<float>::init(cfg, 42);
  const auto path = temp_path("lift_ckpt.lifc");
  lift::save_model(path, model);

  auto restored = lift::VitModel<float>::init(cfg, 7);  // different seed
  lift::load_model(path, restored);
  auto a = lift::named_params(model.params);
  auto b = lift::named_params(restored.params);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].second.data() == b[i].second.data());

  // Forward logits are bit-identical after the round trip.
  lift::Rng rng(3);
  std::vector<float> img(3 * 16 * 16);
  for (auto& v : img) v = static_cast<float>(rng.uniform01());
  auto image = Tensor<float>::from_data({3, 16, 16}, img);
  auto l1 = lift::forward(image, cfg, model.params).logits;
  auto l2 = lift::forward(image, cfg, restored.params).logits;
  CHECK(l1.data() == l2.data());

  // A mismatched target configuration is rejected with a typed error.
  auto other = lift::VitModel<float>::init(cfg.with_qkv_mode(lift::QkvMode::pff), 1);
  CHECK_THROWS_AS(lift::load_model(path, other), lift::Error);
  auto wider = cfg;
  wider.embed_dim = 24;
  auto wide_model = lift::VitModel<float>::init(wider, 1);
  CHECK_THROWS_AS(lift::load_model(path, wide_model), lift::Error);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint readers reject duplicates and bad headers") {
  lift::NamedTensors entries{{"a", Tensor<float>::full({2}, 1.0f)},
                             {"b", Tensor<float>::full({3}, 2.0f)}};
  auto bytes = lift::write_checkpoint_bytes(entries);
  auto back = lift::read_checkpoint_bytes(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back[0].first == "a");
  CHECK(back[1].second.data() == std::vector<float>{2.0f, 2.0f, 2.0f});

  auto corrupt = bytes;
  corrupt[0] = 'Z';
  CHECK_THROWS_AS(lift::read_checkpoint_bytes(corrupt), lift::Error);

  lift::NamedTensors dup{{"a", Tensor<float>::full({1}, 1.0f)}, {"a", Tensor<float>::full({1}, 2.0f)}};
  auto dup_bytes = lift::write_checkpoint_bytes(dup);
  CHECK_THROWS_AS(lift::read_checkpoint_bytes(dup_bytes), lift::Error);
}

TEST_CASE("readers never crash on arbitrary byte strings") {
  lift::Rng rng(1234);
  for (int inst = 0; inst < 300; ++inst) {
    std::vector<uint8_t> junk(rng.uniform_int(64));
    for (auto& b : junk) b = static_cast<uint8_t>(rng.uniform_int(256));
    if (inst % 4 == 0 && junk.size() >= 4) {
      junk[0] = 'L';
      junk[1] = 'I';
      junk[2] = 'F';
      junk[3] = inst % 8 == 0 ? 'T' : 'C';
    }
    for (int reader = 0; reader < 4; ++reader) {
      try {
        switch (reader) {
          case 0: lift::read_tensor_bytes(junk); break;
          case 1: lift::read_checkpoint_bytes(junk); break;
          case 2: lift::read_samples(junk, 16); break;
          case 3: lift::read_pnm_bytes(junk); break;
        }
      } catch (const lift::Error&) {
        // typed failure is the contract
      }
    }
  }
}

TEST_CASE("PGM writer emits the exact header and payload") {
  auto bytes = lift::write_pgm_bytes({0.0f, 1.0f, 1.0f, 0.0f}, 2, 2);
  const std::string header(bytes.begin(), bytes.begin() + 11);
  CHECK(header == "P5\n2 2\n255\n");
  REQUIRE(bytes.size() == 15);
  CHECK(bytes[11] == 0);
  CHECK(bytes[12] == 255);
  CHECK(bytes[13] == 255);
  CHECK(bytes[14] == 0);

  auto zeros = lift::write_pgm_bytes(std::vector<float>(4, 0.0f), 2, 2);
  for (size_t i = 11; i < zeros.size(); ++i) CHECK(zeros[i] == 0);

  CHECK_THROWS_AS(lift::write_pgm_bytes({1.5f}, 1, 1), lift::Error);
  CHECK_THROWS_AS(lift::write_pgm_bytes({-0.1f}, 1, 1), lift::Error);
}

TEST_CASE("PNM reader round-trips the PGM writer and reads P6") {
  auto bytes = lift::write_pgm_bytes({0.0f, 0.5f, 0.25f, 1.0f}, 2, 2);
  auto img = lift::read_pnm_bytes(bytes);
  CHECK(img.channels == 1);
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.pixels == std::vector<uint8_t>{0, 128, 64, 255});

  const std::string p6 = "P6\n2 1\n255\n";
  std::vector<uint8_t> rgb(p6.begin(), p6.end());
  for (uint8_t v : {255, 0, 0, 0, 255, 0}) rgb.push_back(v);
  auto color = lift::read_pnm_bytes(rgb);
  CHECK(color.channels == 3);
  auto tensor = color.to_image_tensor();
  CHECK(tensor.shape() == lift::Shape{3, 1, 2});
  CHECK(tensor.at({0, 0, 0}) == 1.0f);
  CHECK(tensor.at({1, 0, 1}) == 1.0f);
}
