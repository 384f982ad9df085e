// stc command line tool. Everything numerical happens behind the C API in
// libstc; this binary only parses flags, merges configs and moves files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "stc.h"

using nlohmann::json;

namespace {

struct GlobalOpts {
  long long seed = -1;  // >= 0 overrides config seeds
  bool quiet = false;
  bool as_json = false;
  int threads = 1;
};

int exit_code_for(stc_status status) {
  switch (status) {
    case STC_OK: return 0;
    case STC_E_PARSE:
    case STC_E_INVALID_ARGUMENT: return 2;
    default: return 1;
  }
}

[[noreturn]] void die(stc_status status, const std::string& message) {
  json err{{"error", stc_status_name(status)}, {"message", message}};
  std::cerr << err.dump() << "\n";
  std::exit(exit_code_for(status));
}

void check(stc_status status, const std::string& context) {
  if (status != STC_OK) die(status, context + ": " + stc_last_error());
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) die(STC_E_IO, "cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) die(STC_E_PARSE, "malformed JSON in " + path);
  return j;
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) die(STC_E_IO, "cannot write: " + tmp.string());
    out << content;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) die(STC_E_IO, "rename failed: " + path);
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  stc_string_free(s);
  return out;
}

struct TensorHandle {
  stc_tensor* t = nullptr;
  ~TensorHandle() { stc_tensor_free(t); }
};

struct ModelHandle {
  stc_model* m = nullptr;
  ~ModelHandle() { stc_model_free(m); }
};

struct ReportHandle {
  stc_report* r = nullptr;
  ~ReportHandle() { stc_report_free(r); }
};

void emit(const GlobalOpts& g, const json& summary, const std::string& text) {
  if (g.quiet) return;
  if (g.as_json)
    std::cout << summary.dump() << "\n";
  else
    std::cout << text << "\n";
}

// --------------------------------------------------------------------------

void cmd_generate(const GlobalOpts& g, const std::string& spec_path, const std::string& out,
                  const std::string& meta_out) {
  json spec = load_json_file(spec_path);
  if (g.seed >= 0) spec["seed"] = static_cast<uint64_t>(g.seed);
  TensorHandle tensor;
  char* meta = nullptr;
  check(stc_tensor_generate(spec.dump().c_str(), &tensor.t, &meta), "generate");
  check(stc_tensor_write(tensor.t, out.c_str()), "write tensor");
  const std::string metadata = take_string(meta);
  const std::string meta_path = meta_out.empty() ? out + ".meta.json" : meta_out;
  atomic_write(meta_path, metadata + "\n");
  int64_t count = 0;
  stc_tensor_entry_count(tensor.t, &count);
  emit(g, {{"out", out}, {"meta", meta_path}, {"entries", count}},
       "wrote " + out + " (" + std::to_string(count) + " entries)");
}

json config_from_flags_or_file(const GlobalOpts& g, const std::string& config_path,
                               const std::string& method, int rank, double lambda) {
  json config = config_path.empty() ? json::object() : load_json_file(config_path);
  if (!method.empty()) config["method"] = method;
  if (!config.contains("method")) config["method"] = "cpd";
  if (rank > 0) config["rank"] = rank;
  if (lambda >= 0.0) config["smoothness"] = {{"lambda", lambda}};
  if (g.seed >= 0) config["seed"] = static_cast<uint64_t>(g.seed);
  return config;
}

void cmd_complete(const GlobalOpts& g, const std::string& tensor_path,
                  const std::string& config_path, const std::string& method, int rank,
                  double lambda, const std::string& out, const std::string& model_out,
                  const std::string& trace_out) {
  const json config = config_from_flags_or_file(g, config_path, method, rank, lambda);
  TensorHandle observed;
  check(stc_tensor_read(tensor_path.c_str(), &observed.t), "read tensor");
  ModelHandle model;
  char* trace = nullptr;
  check(stc_train(observed.t, config.dump().c_str(), g.threads, g.seed, &model.m, &trace),
        "train");
  const std::string trace_csv = take_string(trace);
  TensorHandle recon;
  check(stc_model_reconstruct(model.m, &recon.t), "reconstruct");
  check(stc_tensor_write(recon.t, out.c_str()), "write tensor");
  if (!model_out.empty()) check(stc_model_save(model.m, model_out.c_str()), "save model");
  if (!trace_out.empty()) atomic_write(trace_out, trace_csv);
  emit(g, {{"out", out}, {"method", config["method"]}},
       "wrote completed tensor " + out);
}

void cmd_ensemble(const GlobalOpts& g, const std::string& tensor_path,
                  const std::string& spec_path, const std::string& out,
                  const std::string& model_out) {
  json config = load_json_file(spec_path);
  config["method"] = "ensemble";
  if (g.seed >= 0) config["seed"] = static_cast<uint64_t>(g.seed);
  TensorHandle observed;
  check(stc_tensor_read(tensor_path.c_str(), &observed.t), "read tensor");
  ModelHandle model;
  check(stc_train(observed.t, config.dump().c_str(), g.threads, g.seed, &model.m, nullptr),
        "train ensemble");
  TensorHandle recon;
  check(stc_model_reconstruct(model.m, &recon.t), "reconstruct");
  check(stc_tensor_write(recon.t, out.c_str()), "write tensor");
  if (!model_out.empty()) check(stc_model_save(model.m, model_out.c_str()), "save model");
  emit(g, {{"out", out}}, "wrote ensemble completion " + out);
}

void cmd_experiment(const GlobalOpts& g, const std::string& kind,
                    const std::string& spec_path, const std::string& out_prefix) {
  json spec = load_json_file(spec_path);
  spec["experiment"] = kind;
  if (g.seed >= 0) spec["seed"] = static_cast<uint64_t>(g.seed);
  if (g.threads > 1) spec["threads"] = g.threads;
  ReportHandle report;
  check(stc_run_experiment(spec.dump().c_str(), &report.r), kind);
  char* csv = nullptr;
  char* js = nullptr;
  check(stc_report_csv(report.r, &csv), "report csv");
  check(stc_report_json(report.r, &js), "report json");
  atomic_write(out_prefix + ".csv", take_string(csv));
  atomic_write(out_prefix + ".json", take_string(js) + "\n");
  emit(g, {{"csv", out_prefix + ".csv"}, {"json", out_prefix + ".json"}},
       "wrote " + out_prefix + ".csv and " + out_prefix + ".json");
}

void cmd_sample(const GlobalOpts& g, const std::string& tensor_path, double fraction,
                long long seed, const std::string& out) {
  TensorHandle dense;
  check(stc_tensor_read(tensor_path.c_str(), &dense.t), "read tensor");
  TensorHandle sampled;
  const uint64_t use_seed = g.seed >= 0 ? static_cast<uint64_t>(g.seed)
                                        : static_cast<uint64_t>(seed < 0 ? 0 : seed);
  check(stc_tensor_sample(dense.t, fraction, use_seed, &sampled.t), "sample");
  check(stc_tensor_write(sampled.t, out.c_str()), "write tensor");
  int64_t count = 0;
  stc_tensor_entry_count(sampled.t, &count);
  emit(g, {{"out", out}, {"entries", count}},
       "sampled " + std::to_string(count) + " entries into " + out);
}

void cmd_convert(const GlobalOpts& g, const std::string& in, const std::string& format,
                 const std::string& out) {
  TensorHandle tensor;
  check(stc_tensor_import(in.c_str(), format.c_str(), &tensor.t), "import");
  check(stc_tensor_write(tensor.t, out.c_str()), "write tensor");
  emit(g, {{"out", out}}, "converted " + in + " -> " + out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stc: sparse tensor completion toolkit (v" +
               std::string(stc_version()) + ")"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOpts g;
  app.add_option("--seed", g.seed, "Override config seeds");
  app.add_flag("--quiet", g.quiet, "Suppress normal output");
  app.add_flag("--json", g.as_json, "Machine readable stdout");
  app.add_option("--threads", g.threads, "Worker threads (default 1, deterministic)");

  std::string spec_path, out_path, meta_path, tensor_path, config_path, method;
  std::string model_out, trace_out, in_path, format = "csv";
  int rank = 0;
  double lambda = -1.0;

  auto* generate = app.add_subcommand("generate", "Generate a benchmark tensor from a spec");
  generate->add_option("--spec", spec_path, "Generator spec JSON")->required();
  generate->add_option("--out", out_path, "Output .sptn path")->required();
  generate->add_option("--meta", meta_path, "Metadata sidecar path");

  double fraction = 0.05;
  long long sample_seed = -1;
  auto* sample = app.add_subcommand("sample", "Sample observed entries from a dense tensor");
  sample->add_option("--tensor", tensor_path, "Dense .sptn")->required();
  sample->add_option("--fraction", fraction, "Observed fraction in (0, 1]")->required();
  sample->add_option("--sample-seed", sample_seed, "Sampling seed");
  sample->add_option("--out", out_path, "Output sparse .sptn")->required();

  auto* complete = app.add_subcommand("complete", "Complete a sparse tensor");
  complete->add_option("--tensor", tensor_path, "Observed sparse .sptn")->required();
  complete->add_option("--config", config_path, "Method config JSON");
  complete->add_option("--method", method, "cpd | cpd-s | tucker | tt | costco");
  complete->add_option("--rank", rank, "Decomposition rank");
  complete->add_option("--lambda", lambda, "Smoothness strength (cpd-s)");
  complete->add_option("--out", out_path, "Completed dense .sptn")->required();
  complete->add_option("--model", model_out, "Save the trained model here");
  complete->add_option("--trace", trace_out, "Save the per-epoch loss CSV here");

  auto* ensemble = app.add_subcommand("ensemble", "Train an ensemble and complete");
  ensemble->add_option("--tensor", tensor_path, "Observed sparse .sptn")->required();
  ensemble->add_option("--spec", spec_path, "Ensemble spec JSON")->required();
  ensemble->add_option("--out", out_path, "Completed dense .sptn")->required();
  ensemble->add_option("--model", model_out, "Save the ensemble checkpoint here");

  const char* experiments[] = {"benchmark", "sweep", "lambda", "rankscan",
                               "crossdataset", "timing"};
  for (const char* kind : experiments) {
    auto* cmd = app.add_subcommand(kind, std::string("Run the ") + kind + " experiment");
    cmd->add_option("--spec", spec_path, "Experiment spec JSON")->required();
    cmd->add_option("--out", out_path, "Report path prefix")->required();
  }

  auto* convert = app.add_subcommand("convert", "Convert a CSV/JSON dump to .sptn");
  convert->add_option("--in", in_path, "Input dump")->required();
  convert->add_option("--format", format, "csv | json");
  convert->add_option("--out", out_path, "Output .sptn")->required();

  CLI11_PARSE(app, argc, argv);

  if (generate->parsed()) {
    cmd_generate(g, spec_path, out_path, meta_path);
  } else if (sample->parsed()) {
    cmd_sample(g, tensor_path, fraction, sample_seed, out_path);
  } else if (complete->parsed()) {
    cmd_complete(g, tensor_path, config_path, method, rank, lambda, out_path, model_out,
                 trace_out);
  } else if (ensemble->parsed()) {
    cmd_ensemble(g, tensor_path, spec_path, out_path, model_out);
  } else if (convert->parsed()) {
    cmd_convert(g, in_path, format, out_path);
  } else {
    for (const char* kind : experiments)
      if (app.get_subcommand(kind)->parsed()) {
        cmd_experiment(g, kind, spec_path, out_path);
        return 0;
      }
  }
  return 0;
}
