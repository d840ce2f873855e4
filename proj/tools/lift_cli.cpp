// Command-line front end: dataset generation, training, evaluation, cost
// accounting, attention export, and roll-out visualization.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "lift/accounting.hpp"
#include "lift/checkpoint.hpp"
#include "lift/rollout.hpp"
#include "lift/train.hpp"

namespace {

using nlohmann::json;

struct OptimizerConfig {
  std::string kind = "adamw";
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct DataConfig {
  std::string kind = "synthetic";  // synthetic | cifar10
  std::string path;
  bool normalize = false;
};

// Merged view of the config file; flags override individual fields.
struct RunConfig {
  lift::ModelConfig model;
  OptimizerConfig optimizer;
  int epochs = 2;
  int batch_size = 64;
  uint64_t seed = 1;
  DataConfig data;
  std::string out_dir = ".";
};

json parse_json_file(const std::string& path) {
  auto bytes = lift::read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw lift::Error(lift::ErrorCode::InvalidArgument, "config '" + path + "': " + e.what());
  }
}

void merge_model(const json& j, lift::ModelConfig& cfg) {
  cfg.image_size = j.value("image_size", cfg.image_size);
  cfg.patch_size = j.value("patch_size", cfg.patch_size);
  cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
  cfg.depth = j.value("depth", cfg.depth);
  cfg.num_heads = j.value("num_heads", cfg.num_heads);
  cfg.mlp_ratio = j.value("mlp_ratio", cfg.mlp_ratio);
  cfg.num_classes = j.value("num_classes", cfg.num_classes);
  cfg.dropout = j.value("dropout", cfg.dropout);
  if (j.contains("qkv_mode"))
    cfg = cfg.with_qkv_mode(lift::qkv_mode_from_string(j["qkv_mode"].get<std::string>()));
  if (j.contains("kernel_sizes")) cfg.kernel_sizes = j["kernel_sizes"].get<std::vector<int>>();
  if (j.contains("paddings")) cfg.paddings = j["paddings"].get<std::vector<int>>();
}

RunConfig load_run_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  const json j = parse_json_file(path);
  if (j.contains("model")) merge_model(j["model"], rc.model);
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    rc.optimizer.kind = o.value("kind", rc.optimizer.kind);
    rc.optimizer.learning_rate = o.value("learning_rate", rc.optimizer.learning_rate);
    rc.optimizer.momentum = o.value("momentum", rc.optimizer.momentum);
    rc.optimizer.beta1 = o.value("beta1", rc.optimizer.beta1);
    rc.optimizer.beta2 = o.value("beta2", rc.optimizer.beta2);
    rc.optimizer.eps = o.value("eps", rc.optimizer.eps);
    rc.optimizer.weight_decay = o.value("weight_decay", rc.optimizer.weight_decay);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    rc.epochs = t.value("epochs", rc.epochs);
    rc.batch_size = t.value("batch_size", rc.batch_size);
    rc.seed = t.value("seed", rc.seed);
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    rc.data.kind = d.value("kind", rc.data.kind);
    rc.data.path = d.value("path", rc.data.path);
    rc.data.normalize = d.value("normalize", rc.data.normalize);
  }
  rc.out_dir = j.value("out_dir", rc.out_dir);
  return rc;
}

lift::Optimizer<float> make_optimizer(const OptimizerConfig& oc) {
  lift::Optimizer<float> opt;
  if (oc.kind == "adamw")
    opt.kind = lift::OptimizerKind::adamw;
  else if (oc.kind == "sgd_momentum" || oc.kind == "sgd")
    opt.kind = lift::OptimizerKind::sgd_momentum;
  else
    throw lift::Error(lift::ErrorCode::InvalidArgument, "unknown optimizer kind '" + oc.kind + "'");
  opt.learning_rate = static_cast<float>(oc.learning_rate);
  opt.momentum = static_cast<float>(oc.momentum);
  opt.beta1 = static_cast<float>(oc.beta1);
  opt.beta2 = static_cast<float>(oc.beta2);
  opt.eps = static_cast<float>(oc.eps);
  opt.weight_decay = static_cast<float>(oc.weight_decay);
  opt.validate();
  return opt;
}

std::vector<lift::Sample> load_dataset(const DataConfig& dc, const lift::ModelConfig& model) {
  if (dc.path.empty())
    throw lift::Error(lift::ErrorCode::InvalidArgument, "dataset path is required");
  const auto bytes = lift::read_file(dc.path);
  std::vector<lift::Sample> samples;
  if (dc.kind == "cifar10")
    samples = lift::read_cifar(bytes, lift::CifarVariant::cifar10);
  else if (dc.kind == "synthetic")
    samples = lift::read_samples(bytes, model.num_classes);
  else
    throw lift::Error(lift::ErrorCode::InvalidArgument, "unknown dataset kind '" + dc.kind + "'");
  if (dc.normalize && !samples.empty())
    lift::normalize_samples(samples, lift::channel_stats(samples));
  return samples;
}

lift::Tensor<float> load_model_image(const std::string& path, const lift::ModelConfig& cfg) {
  auto img = lift::read_pnm_file(path).to_image_tensor();
  if (img.shape() != lift::Shape{3, cfg.image_size, cfg.image_size})
    throw lift::Error(lift::ErrorCode::ShapeMismatch,
                      "image is " + lift::shape_str(img.shape()) + " but the model expects 3x" +
                          std::to_string(cfg.image_size) + "x" + std::to_string(cfg.image_size));
  return img;
}

lift::VitModel<float> load_checkpointed_model(const std::string& ckpt, const lift::ModelConfig& cfg) {
  auto model = lift::VitModel<float>::init(cfg, 0);
  lift::load_model(ckpt, model);
  return model;
}

// Region argument: either "x0,y0,x1,y1" in pixels or a PGM mask path.
std::vector<int> tokens_from_mask_arg(const std::string& arg, const lift::ModelConfig& cfg) {
  const int g = cfg.grid();
  int x0, y0, x1, y1;
  if (std::sscanf(arg.c_str(), "%d,%d,%d,%d", &x0, &y0, &x1, &y1) == 4)
    return lift::align_mask_bbox(x0, y0, x1, y1, cfg.patch_size, g, g);
  const auto img = lift::read_pnm_file(arg);
  lift::RegionMask region;
  region.height = img.height;
  region.width = img.width;
  region.source = lift::RegionSource::segmentation;
  region.grid.resize(static_cast<size_t>(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      // For P6 masks any nonzero channel marks the cell.
      bool on = false;
      for (int c = 0; c < img.channels; ++c)
        on = on || img.pixels[(static_cast<size_t>(y) * img.width + x) * img.channels + c] != 0;
      region.grid[static_cast<size_t>(y) * img.width + x] = on ? 1 : 0;
    }
  return lift::align_mask(region, cfg.patch_size, g, g);
}

void print_cost_report(const lift::CostReport& report) {
  std::cout << "total_params " << report.total_params << "\n";
  std::cout << "total_macs " << report.total_macs << "\n";
  std::cout << "gmac " << static_cast<double>(report.total_macs) / 1e9 << "\n";
  std::cout << "input_size " << report.input_size << "\n";
  for (const auto& item : report.breakdown)
    std::cout << "breakdown." << item.name << ".params " << item.params << " breakdown." << item.name
              << ".macs " << item.macs << "\n";
}

json cost_report_json(const lift::CostReport& report) {
  json j;
  j["total_params"] = report.total_params;
  j["total_macs"] = report.total_macs;
  j["gmac"] = static_cast<double>(report.total_macs) / 1e9;
  j["input_size"] = report.input_size;
  j["breakdown"] = json::array();
  for (const auto& item : report.breakdown)
    j["breakdown"].push_back({{"name", item.name}, {"params", item.params}, {"macs", item.macs}});
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lift: a miniature ViT stack with LIFE Q/K/V generation and attention roll-outs"};
  app.require_subcommand(1);
  std::function<int()> action;

  // Shared model/config flags.
  std::string config_path, qkv_flag;

  auto add_config_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration");
    cmd->add_option("--qkv", qkv_flag, "Q/K/V generator: pff | life | life-onescale");
  };
  auto resolve_config = [&]() {
    RunConfig rc = load_run_config(config_path);
    if (!qkv_flag.empty()) rc.model = rc.model.with_qkv_mode(lift::qkv_mode_from_string(qkv_flag));
    return rc;
  };

  // gen-data
  {
    auto* cmd = app.add_subcommand("gen-data", "generate the synthetic locality dataset");
    auto seed = std::make_shared<uint64_t>(1);
    auto classes = std::make_shared<int>(8);
    auto n = std::make_shared<int>(1000);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--seed", *seed, "generator seed");
    cmd->add_option("--classes", *classes, "number of motif classes (max 16)");
    cmd->add_option("--n", *n, "number of samples");
    cmd->add_option("--out", *out, "output file")->required();
    cmd->callback([&action, seed, classes, n, out] {
      action = [=] {
        auto samples = lift::gen_synthetic(*seed, *n, *classes);
        lift::write_file(*out, lift::write_samples(samples));
        std::cout << "wrote " << samples.size() << " samples to " << *out << "\n";
        return 0;
      };
    });
  }

  // train
  {
    auto* cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    add_config_flags(cmd);
    auto out = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto epochs = std::make_shared<int>(-1);
    auto batch = std::make_shared<int>(-1);
    auto seed = std::make_shared<int64_t>(-1);
    auto lr = std::make_shared<double>(-1.0);
    cmd->add_option("--out", *out, "checkpoint output path")->required();
    cmd->add_option("--data", *data, "training data file (overrides config)");
    cmd->add_option("--epochs", *epochs, "override epoch count");
    cmd->add_option("--batch-size", *batch, "override batch size");
    cmd->add_option("--seed", *seed, "override seed");
    cmd->add_option("--lr", *lr, "override learning rate");
    cmd->callback([&action, &resolve_config, out, data, epochs, batch, seed, lr] {
      action = [=, &resolve_config] {
        RunConfig rc = resolve_config();
        if (!data->empty()) rc.data.path = *data;
        if (*epochs > 0) rc.epochs = *epochs;
        if (*batch > 0) rc.batch_size = *batch;
        if (*seed >= 0) rc.seed = static_cast<uint64_t>(*seed);
        if (*lr > 0) rc.optimizer.learning_rate = *lr;
        rc.model.validate();

        auto samples = load_dataset(rc.data, rc.model);
        auto model = lift::VitModel<float>::init(rc.model, rc.seed);
        auto opt = make_optimizer(rc.optimizer);
        lift::Rng rng(rc.seed);

        std::ofstream metrics(*out + ".metrics.jsonl", std::ios::trunc);
        if (!metrics)
          throw lift::Error(lift::ErrorCode::IoFailure, "cannot write metrics next to " + *out);
        for (int e = 1; e <= rc.epochs; ++e) {
          const auto m = lift::train_epoch(model, samples, opt, rc.batch_size, rng);
          json line{{"epoch", e}, {"loss", m.mean_loss}, {"accuracy", m.accuracy}};
          std::cout << line.dump() << "\n";
          metrics << line.dump() << "\n";
        }
        lift::save_model(*out, model);
        return 0;
      };
    });
  }

  // eval
  {
    auto* cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    add_config_flags(cmd);
    auto ckpt = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    cmd->add_option("--ckpt", *ckpt, "checkpoint path")->required();
    cmd->add_option("--data", *data, "dataset file")->required();
    cmd->callback([&action, &resolve_config, ckpt, data] {
      action = [=, &resolve_config] {
        RunConfig rc = resolve_config();
        rc.data.path = *data;
        auto model = load_checkpointed_model(*ckpt, rc.model);
        auto samples = load_dataset(rc.data, rc.model);
        const auto m = lift::evaluate(model, samples);
        std::cout << "accuracy " << m.accuracy << "\n";
        std::cout << "loss " << m.mean_loss << "\n";
        return 0;
      };
    });
  }

  // count
  {
    auto* cmd = app.add_subcommand("count", "parameter and MAC accounting for a configuration");
    add_config_flags(cmd);
    auto input = std::make_shared<int>(0);
    auto json_out = std::make_shared<std::string>();
    cmd->add_option("--input-size", *input, "input resolution for the MAC count");
    cmd->add_option("--json", *json_out, "also write the report as JSON");
    cmd->callback([&action, &resolve_config, input, json_out] {
      action = [=, &resolve_config] {
        RunConfig rc = resolve_config();
        const auto report = lift::cost_report(rc.model, *input);
        print_cost_report(report);
        if (!json_out->empty()) {
          const std::string text = cost_report_json(report).dump(2) + "\n";
          lift::write_file(*json_out, std::vector<uint8_t>(text.begin(), text.end()));
        }
        return 0;
      };
    });
  }

  // export-attn
  {
    auto* cmd = app.add_subcommand("export-attn", "export per-block head-averaged attention");
    add_config_flags(cmd);
    auto ckpt = std::make_shared<std::string>();
    auto image = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--ckpt", *ckpt, "checkpoint path")->required();
    cmd->add_option("--image", *image, "input image (binary PGM/PPM)")->required();
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->callback([&action, &resolve_config, ckpt, image, out] {
      action = [=, &resolve_config] {
        RunConfig rc = resolve_config();
        auto model = load_checkpointed_model(*ckpt, rc.model);
        auto img = load_model_image(*image, rc.model);
        lift::NoGradGuard guard;
        auto res = lift::forward(img, rc.model, model.params);
        std::filesystem::create_directories(*out);
        for (size_t l = 0; l < res.attention.blocks.size(); ++l) {
          const auto avg = lift::head_average(res.attention, static_cast<int>(l));
          std::vector<float> data(static_cast<size_t>(avg.rows()) * avg.cols());
          for (Eigen::Index i = 0; i < avg.rows(); ++i)
            for (Eigen::Index j = 0; j < avg.cols(); ++j)
              data[static_cast<size_t>(i) * avg.cols() + j] = static_cast<float>(avg(i, j));
          const auto path = std::filesystem::path(*out) / ("attn_block_" + std::to_string(l) + ".lift");
          lift::write_tensor_file(path.string(),
                                  lift::Tensor<float>::from_data(
                                      {static_cast<int>(avg.rows()), static_cast<int>(avg.cols())},
                                      std::move(data)));
        }
        std::cout << "wrote " << res.attention.blocks.size() << " attention tensors to " << *out << "\n";
        return 0;
      };
    });
  }

  // viz-cls
  {
    auto* cmd = app.add_subcommand("viz-cls", "Attention Roll-Out map for the classification token");
    add_config_flags(cmd);
    auto ckpt = std::make_shared<std::string>();
    auto image = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--ckpt", *ckpt, "checkpoint path")->required();
    cmd->add_option("--image", *image, "input image (binary PGM/PPM)")->required();
    cmd->add_option("--out", *out, "output PGM path")->required();
    cmd->callback([&action, &resolve_config, ckpt, image, out] {
      action = [=, &resolve_config] {
        RunConfig rc = resolve_config();
        auto model = load_checkpointed_model(*ckpt, rc.model);
        auto img = load_model_image(*image, rc.model);
        lift::NoGradGuard guard;
        auto res = lift::forward(img, rc.model, model.params);
        const auto r = lift::rollout(res.attention);
        const auto map = lift::cls_attention_map(r, rc.model.grid(), rc.model.grid());
        lift::write_map_pgm(*out, lift::map_to_floats(map), rc.model.grid(), rc.model.grid());
        std::cout << "wrote " << *out << "\n";
        return 0;
      };
    });
  }

  // viz-dense
  {
    auto* cmd = app.add_subcommand("viz-dense", "Dense Attention Roll-Out map for a region");
    add_config_flags(cmd);
    auto ckpt = std::make_shared<std::string>();
    auto image = std::make_shared<std::string>();
    auto mask = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--ckpt", *ckpt, "checkpoint path")->required();
    cmd->add_option("--image", *image, "input image (binary PGM/PPM)")->required();
    cmd->add_option("--mask", *mask, "region: x0,y0,x1,y1 in pixels, or a PGM mask path")->required();
    cmd->add_option("--out", *out, "output PGM path")->required();
    cmd->callback([&action, &resolve_config, ckpt, image, mask, out] {
      action = [=, &resolve_config] {
        RunConfig rc = resolve_config();
        auto model = load_checkpointed_model(*ckpt, rc.model);
        auto img = load_model_image(*image, rc.model);
        lift::NoGradGuard guard;
        auto res = lift::forward(img, rc.model, model.params);
        const auto r = lift::rollout(res.attention);
        const auto tokens = tokens_from_mask_arg(*mask, rc.model);
        const auto map = lift::dense_rollout(r, tokens, rc.model.grid(), rc.model.grid());
        lift::write_map_pgm(*out, lift::map_to_floats(map), rc.model.grid(), rc.model.grid());
        std::cout << "wrote " << *out << "\n";
        return 0;
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action();
  } catch (const lift::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
