#include "stc.h"

#include <cstring>
#include <string>

#include <json.hpp>

#include "stc/config.hpp"
#include "stc/datagen.hpp"
#include "stc/harness.hpp"
#include "stc/io.hpp"

using nlohmann::json;

struct stc_tensor {
  stc::TensorFile file;
};

struct stc_model {
  stc::AnyModel model;
};

struct stc_report {
  stc::ExperimentReport report;
};

namespace {

thread_local std::string g_last_error;

stc_status status_of(stc::ErrorCode code) {
  switch (code) {
    case stc::ErrorCode::InvalidArgument: return STC_E_INVALID_ARGUMENT;
    case stc::ErrorCode::Parse: return STC_E_PARSE;
    case stc::ErrorCode::Io: return STC_E_IO;
    case stc::ErrorCode::IndexOutOfBounds: return STC_E_BOUNDS;
    case stc::ErrorCode::DuplicateIndex: return STC_E_DUPLICATE_INDEX;
    case stc::ErrorCode::NonFinite: return STC_E_NONFINITE;
    case stc::ErrorCode::ShapeMismatch: return STC_E_SHAPE_MISMATCH;
    case stc::ErrorCode::EmptySet: return STC_E_EMPTY;
    case stc::ErrorCode::Internal: return STC_E_INTERNAL;
  }
  return STC_E_INTERNAL;
}

template <typename Fn>
stc_status guarded(Fn&& fn) {
  try {
    fn();
    return STC_OK;
  } catch (const stc::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return STC_E_PARSE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return STC_E_INTERNAL;
  }
}

stc_status require(bool ok, const char* message) {
  if (ok) return STC_OK;
  g_last_error = message;
  return STC_E_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_config(const char* text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    stc::fail(stc::ErrorCode::Parse, std::string(what) + ": malformed JSON");
  return j;
}

}  // namespace

extern "C" {

const char* stc_version(void) { return stc::version_string(); }

const char* stc_status_name(stc_status status) {
  switch (status) {
    case STC_OK: return "ok";
    case STC_E_INVALID_ARGUMENT: return "invalid_argument";
    case STC_E_PARSE: return "parse";
    case STC_E_IO: return "io";
    case STC_E_BOUNDS: return "bounds";
    case STC_E_DUPLICATE_INDEX: return "duplicate_index";
    case STC_E_NONFINITE: return "nonfinite";
    case STC_E_SHAPE_MISMATCH: return "shape_mismatch";
    case STC_E_EMPTY: return "empty";
    case STC_E_INTERNAL: return "internal";
  }
  return "?";
}

const char* stc_last_error(void) { return g_last_error.c_str(); }

stc_status stc_tensor_read(const char* path, stc_tensor** out) {
  if (stc_status s = require(path && out, "tensor_read: null argument")) return s;
  return guarded([&] { *out = new stc_tensor{stc::read_tensor(path)}; });
}

stc_status stc_tensor_write(const stc_tensor* tensor, const char* path) {
  if (stc_status s = require(tensor && path, "tensor_write: null argument")) return s;
  return guarded([&] { stc::write_tensor(tensor->file, path); });
}

stc_status stc_tensor_import(const char* path, const char* format, stc_tensor** out) {
  if (stc_status s = require(path && format && out, "tensor_import: null argument")) return s;
  return guarded([&] { *out = new stc_tensor{stc::import_dump(path, format)}; });
}

stc_status stc_tensor_generate(const char* spec_json, stc_tensor** out,
                               char** metadata_json) {
  if (stc_status s = require(spec_json && out, "tensor_generate: null argument")) return s;
  return guarded([&] {
    const json spec = parse_config(spec_json, "generate spec");
    stc::GeneratedTensor g = stc::generate(spec);
    json meta = g.metadata;
    meta["provenance"] = stc::provenance_json(spec, spec.value("seed", uint64_t{0}));
    const std::string name = spec.value("name", spec.value("kind", std::string()));
    *out = new stc_tensor{stc::TensorFile{name, std::move(g.tensor)}};
    if (metadata_json) *metadata_json = dup_string(meta.dump(2));
  });
}

stc_status stc_tensor_sample(const stc_tensor* dense, double fraction, uint64_t seed,
                             stc_tensor** out) {
  if (stc_status s = require(dense && out, "tensor_sample: null argument")) return s;
  return guarded([&] {
    if (!dense->file.is_dense())
      stc::fail(stc::ErrorCode::InvalidArgument, "tensor_sample: input must be dense");
    stc::SparseTensor sampled = stc::sample_observed(dense->file.dense(), fraction, seed);
    *out = new stc_tensor{stc::TensorFile{dense->file.name, std::move(sampled)}};
  });
}

stc_status stc_tensor_order(const stc_tensor* tensor, int32_t* out) {
  if (stc_status s = require(tensor && out, "tensor_order: null argument")) return s;
  *out = tensor->file.shape().order();
  return STC_OK;
}

stc_status stc_tensor_shape(const stc_tensor* tensor, int64_t* dims, int32_t capacity) {
  if (stc_status s = require(tensor && dims, "tensor_shape: null argument")) return s;
  const auto& d = tensor->file.shape().dims();
  if (capacity < static_cast<int32_t>(d.size()))
    return require(false, "tensor_shape: capacity too small");
  for (size_t i = 0; i < d.size(); ++i) dims[i] = d[i];
  return STC_OK;
}

stc_status stc_tensor_entry_count(const stc_tensor* tensor, int64_t* out) {
  if (stc_status s = require(tensor && out, "tensor_entry_count: null argument")) return s;
  *out = tensor->file.is_dense() ? tensor->file.shape().element_count()
                                 : tensor->file.sparse().count();
  return STC_OK;
}

stc_status stc_tensor_is_dense(const stc_tensor* tensor, int32_t* out) {
  if (stc_status s = require(tensor && out, "tensor_is_dense: null argument")) return s;
  *out = tensor->file.is_dense() ? 1 : 0;
  return STC_OK;
}

stc_status stc_tensor_name(const stc_tensor* tensor, char** out) {
  if (stc_status s = require(tensor && out, "tensor_name: null argument")) return s;
  *out = dup_string(tensor->file.name);
  return STC_OK;
}

stc_status stc_tensor_metrics(const stc_tensor* predicted, const stc_tensor* truth,
                              const stc_tensor* observed, double* mae_out, double* rmse_out,
                              double* nerr_out) {
  if (stc_status s = require(predicted && truth, "tensor_metrics: null argument")) return s;
  return guarded([&] {
    if (!predicted->file.is_dense() || !truth->file.is_dense())
      stc::fail(stc::ErrorCode::InvalidArgument, "tensor_metrics: tensors must be dense");
    std::vector<int64_t> over;
    if (observed) {
      if (observed->file.is_dense())
        stc::fail(stc::ErrorCode::InvalidArgument, "tensor_metrics: observed must be sparse");
      over = stc::complement_indices(observed->file.sparse());
    } else {
      over = stc::all_indices(truth->file.shape());
    }
    if (mae_out) *mae_out = stc::mae(predicted->file.dense(), truth->file.dense(), over);
    if (rmse_out) *rmse_out = stc::rmse(predicted->file.dense(), truth->file.dense(), over);
    if (nerr_out)
      *nerr_out = stc::normalized_error(predicted->file.dense(), truth->file.dense(), over);
  });
}

void stc_tensor_free(stc_tensor* tensor) { delete tensor; }

stc_status stc_train(const stc_tensor* observed, const char* config_json, int32_t threads,
                     int64_t seed_override, stc_model** out, char** trace_csv) {
  if (stc_status s = require(observed && config_json && out, "train: null argument")) return s;
  return guarded([&] {
    if (observed->file.is_dense())
      stc::fail(stc::ErrorCode::InvalidArgument,
                "train: observed tensor must be sparse (sample a dense one first)");
    const json config = parse_config(config_json, "train config");
    stc::TrainAnyResult res = stc::train_any(observed->file.sparse(), config,
                                             threads < 1 ? 1 : threads, seed_override);
    *out = new stc_model{std::move(res.model)};
    if (trace_csv) *trace_csv = dup_string(res.trace_csv);
  });
}

stc_status stc_model_predict(const stc_model* model, const int64_t* index, int32_t order,
                             double* out) {
  if (stc_status s = require(model && index && out, "model_predict: null argument")) return s;
  return guarded([&] {
    *out = model->model.predict(std::span<const int64_t>(index, static_cast<size_t>(order)));
  });
}

stc_status stc_model_reconstruct(const stc_model* model, stc_tensor** out) {
  if (stc_status s = require(model && out, "model_reconstruct: null argument")) return s;
  return guarded([&] {
    *out = new stc_tensor{stc::TensorFile{"", model->model.reconstruct()}};
  });
}

stc_status stc_model_save(const stc_model* model, const char* path) {
  if (stc_status s = require(model && path, "model_save: null argument")) return s;
  return guarded([&] { stc::save_model(model->model, path); });
}

stc_status stc_model_load(const char* path, stc_model** out) {
  if (stc_status s = require(path && out, "model_load: null argument")) return s;
  return guarded([&] { *out = new stc_model{stc::load_model(path)}; });
}

void stc_model_free(stc_model* model) { delete model; }

stc_status stc_run_experiment(const char* spec_json, stc_report** out) {
  if (stc_status s = require(spec_json && out, "run_experiment: null argument")) return s;
  return guarded([&] {
    const json spec = parse_config(spec_json, "experiment spec");
    stc::ExperimentSpec parsed = stc::ExperimentSpec::from_json(spec);
    *out = new stc_report{stc::run_experiment(parsed)};
  });
}

stc_status stc_report_csv(const stc_report* report, char** out) {
  if (stc_status s = require(report && out, "report_csv: null argument")) return s;
  *out = dup_string(report->report.to_csv());
  return STC_OK;
}

stc_status stc_report_json(const stc_report* report, char** out) {
  if (stc_status s = require(report && out, "report_json: null argument")) return s;
  return guarded([&] { *out = dup_string(report->report.to_json().dump(2)); });
}

void stc_report_free(stc_report* report) { delete report; }

void stc_string_free(char* s) { delete[] s; }

}  // extern "C"
