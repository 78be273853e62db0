#include "gestboot/ablation.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gestboot/error.hpp"
#include "gestboot/pipeline.hpp"

namespace gestboot {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Variant {
  std::string id;
  std::vector<std::pair<std::string, std::string>> keys;  // studied key overrides
};

struct StudyPlan {
  std::vector<std::pair<std::string, std::string>> shared;  // same for all variants
  std::vector<Variant> variants;
  bool report_gesture_f1 = false;
};

StudyPlan plan_study(const std::string& study) {
  StudyPlan p;
  if (study == "inputs") {
    // Cue combinations; unused stack channels are zeroed. This study measures
    // the gesture net itself, so the pipeline stops after its evaluation.
    p.shared = {{"stage", "gesture"}};
    p.report_gesture_f1 = true;
    p.variants = {
        {"bgsub", {{"stack_zero_channels", "flowx,flowy"}}},
        {"flow", {{"stack_zero_channels", "bg"}}},
        {"bgsub+flowx", {{"stack_zero_channels", "flowy"}}},
        {"bgsub+flowy", {{"stack_zero_channels", "flowx"}}},
        {"bgsub+flowx+flowy", {{"stack_zero_channels", ""}}},
    };
  } else if (study == "augmentation") {
    auto row = [](const char* id, bool t, bool b, bool e) {
      return Variant{id,
                     {{"aug_transform", t ? "true" : "false"},
                      {"aug_brightness", b ? "true" : "false"},
                      {"aug_background", e ? "true" : "false"}}};
    };
    p.variants = {
        row("none", false, false, false),
        row("brightness", false, true, false),
        row("environment", false, false, true),
        row("brightness+transform", true, true, false),
        row("environment+transform", true, false, true),
        row("brightness+transform+environment", true, true, true),
    };
  } else if (study == "dropout") {
    const std::vector<std::pair<std::string, std::string>> placements = {
        {"fc7+fc6", "fc6,fc7"},
        {"fc7..conv5", "conv5,fc6,fc7"},
        {"fc7..conv4", "conv4,conv5,fc6,fc7"},
        {"fc7..conv3", "conv3,conv4,conv5,fc6,fc7"},
        {"fc7..conv2", "conv2,conv3,conv4,conv5,fc6,fc7"},
        {"fc7..conv1", "conv1,conv2,conv3,conv4,conv5,fc6,fc7"},
    };
    for (const auto& [pid, layers] : placements) {
      for (const char* ratio : {"0.4", "0.5"}) {
        p.variants.push_back({pid + "@" + ratio,
                              {{"appearance_dropout_after", layers},
                               {"appearance_dropout_ratio", ratio}}});
      }
    }
  } else if (study == "videos") {
    for (const char* n : {"1", "2", "4"})
      p.variants.push_back({std::string("videos") + n, {{"num_gesture_videos", n}}});
  } else if (study == "uncertainty") {
    p.variants = {
        {"precision", {{"use_precision", "true"}}},
        {"identity", {{"use_precision", "false"}}},
    };
  } else {
    throw UsageError("ablate: unknown study `" + study +
                     "` (expected inputs, augmentation, dropout, videos, uncertainty)");
  }
  return p;
}

}  // namespace

std::vector<AblationResult> ablation_runner(const std::string& study, const Config& base_config,
                                            const std::string& out_root_in) {
  const StudyPlan plan = plan_study(study);
  std::string out_root = out_root_in;
  if (out_root.empty() && base_config.has("out_dir")) out_root = base_config.get_string("out_dir");
  if (out_root.empty()) throw ConfigError("config: missing required key `out_dir`");

  std::vector<AblationResult> results;
  std::set<std::string> seen;
  for (const auto& v : plan.variants) {
    Config variant = base_config;
    for (const auto& [k, val] : plan.shared) variant.set(k, val);
    for (const auto& [k, val] : v.keys) variant.set(k, val);
    if (!seen.insert(v.id).second) throw Error("ablation: duplicate variant id " + v.id);
    std::cout << "[ablate] " << study << " / " << v.id << std::endl;
    const PipelineResult run =
        run_pipeline(variant, out_root + "/" + study + "/" + v.id);
    AblationResult r;
    r.variant = v.id;
    r.f1 = plan.report_gesture_f1 ? run.gesture_f1 : run.test_f1;
    r.config_snapshot = variant.canonical();
    results.push_back(std::move(r));
  }

  // Study summary: one table row / record per variant.
  const std::string study_dir = out_root + "/" + study;
  fs::create_directories(study_dir);
  std::ostringstream txt, nd;
  txt << "ablation study: " << study << "\n";
  txt << (plan.report_gesture_f1 ? "metric: gesture-net F1\n\n" : "metric: held-out test F1\n\n");
  for (const auto& r : results) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-36s %.4f\n", r.variant.c_str(), r.f1.f1);
    txt << line;
    nd << json{{"record", "ablation_variant"},
               {"study", study},
               {"variant", r.variant},
               {"f1", r.f1.f1},
               {"precision", r.f1.precision},
               {"recall", r.f1.recall},
               {"config", r.config_snapshot}}
              .dump()
       << "\n";
  }
  std::ofstream f(study_dir + "/summary.txt", std::ios::binary);
  if (!f) throw IoError("cannot write " + study_dir + "/summary.txt");
  f << txt.str();
  std::ofstream g(study_dir + "/summary.ndjson", std::ios::binary);
  if (!g) throw IoError("cannot write " + study_dir + "/summary.ndjson");
  g << nd.str();
  return results;
}

}  // namespace gestboot
