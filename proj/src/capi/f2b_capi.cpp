#include <f2b/f2b.h>

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include <json.hpp>

#include "core/bias.hpp"
#include "core/error.hpp"
#include "core/eval.hpp"
#include "core/ingest.hpp"
#include "core/split.hpp"
#include "core/svr.hpp"
#include "core/synth.hpp"

struct f2b_dataset {
  f2b::Dataset ds;
  f2b::BuildReport report;
};

struct f2b_split {
  f2b::SplitPlan plan;
};

struct f2b_model {
  f2b::SvrModel model;
};

struct f2b_pairs {
  std::vector<f2b::ComparisonPair> pairs;
};

namespace {

thread_local std::string g_last_error;

f2b_status status_of(f2b::ErrorKind kind) {
  using K = f2b::ErrorKind;
  switch (kind) {
    case K::Domain: return F2B_E_DOMAIN;
    case K::Parse: return F2B_E_PARSE;
    case K::Integrity: return F2B_E_INTEGRITY;
    case K::Format: return F2B_E_FORMAT;
    case K::Corruption: return F2B_E_CORRUPTION;
    case K::Validation: return F2B_E_VALIDATION;
    case K::Io: return F2B_E_IO;
    case K::Convergence: return F2B_E_CONVERGENCE;
    case K::Capacity: return F2B_E_CAPACITY;
    case K::UndefinedCorrelation: return F2B_E_UNDEFINED_CORRELATION;
  }
  return F2B_E_INTERNAL;
}

template <typename Fn>
f2b_status guarded(Fn&& fn) noexcept {
  g_last_error.clear();
  try {
    fn();
    return F2B_OK;
  } catch (const f2b::Error& e) {
    g_last_error = std::string(f2b::to_string(e.kind())) + ": " + e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
  } catch (...) {
    g_last_error = "internal error";
  }
  return F2B_E_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) f2b::fail(f2b::ErrorKind::Validation, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> all_ids(const f2b::Dataset& ds) { return ds.record_ids(); }

}  // namespace

extern "C" {

const char* f2b_version(void) { return "1.0.0"; }

const char* f2b_last_error(void) { return g_last_error.c_str(); }

const char* f2b_status_name(f2b_status status) {
  switch (status) {
    case F2B_OK: return "ok";
    case F2B_E_DOMAIN: return "domain error";
    case F2B_E_PARSE: return "parse error";
    case F2B_E_INTEGRITY: return "integrity error";
    case F2B_E_FORMAT: return "format error";
    case F2B_E_CORRUPTION: return "corruption error";
    case F2B_E_VALIDATION: return "validation error";
    case F2B_E_IO: return "i/o error";
    case F2B_E_CONVERGENCE: return "convergence error";
    case F2B_E_CAPACITY: return "capacity error";
    case F2B_E_UNDEFINED_CORRELATION: return "undefined correlation";
    case F2B_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

int f2b_status_is_algorithmic(f2b_status status) { return status >= 20 && status < 99; }

void f2b_string_free(char* s) { std::free(s); }

f2b_status f2b_dataset_load(const char* metadata_csv, const char* embeddings_f2be, int normalize,
                            f2b_dataset** out) {
  return guarded([&] {
    require(metadata_csv, "metadata path");
    require(embeddings_f2be, "embeddings path");
    require(out, "out");
    const auto records = f2b::load_metadata(metadata_csv);
    const auto embeddings = f2b::read_embeddings(embeddings_f2be);
    auto built = f2b::build_dataset(records, embeddings, normalize != 0);
    if (built.dataset.size() == 0) f2b::fail(f2b::ErrorKind::Validation, "no complete records after join");
    *out = new f2b_dataset{std::move(built.dataset), std::move(built.report)};
  });
}

void f2b_dataset_free(f2b_dataset* ds) { delete ds; }

size_t f2b_dataset_size(const f2b_dataset* ds) { return ds ? ds->ds.size() : 0; }

size_t f2b_dataset_dim(const f2b_dataset* ds) { return ds ? ds->ds.dim() : 0; }

f2b_status f2b_dataset_report_json(const f2b_dataset* ds, char** out_json) {
  return guarded([&] {
    require(ds, "dataset");
    require(out_json, "out_json");
    nlohmann::ordered_json j;
    j["records"] = ds->ds.size();
    j["dim"] = ds->ds.dim();
    j["normalized"] = ds->ds.normalized();
    j["orphan_records"] = ds->report.orphan_records;
    j["orphan_embeddings"] = ds->report.orphan_embeddings;
    j["incomplete_persons"] = ds->report.incomplete_persons;
    *out_json = dup_string(j.dump(2) + "\n");
  });
}

f2b_status f2b_synth_write(size_t persons, size_t dim, double noise_sd, uint64_t seed, const char* metadata_out,
                           const char* embeddings_out) {
  return guarded([&] {
    require(metadata_out, "metadata path");
    require(embeddings_out, "embeddings path");
    f2b::SynthConfig cfg;
    cfg.persons = persons;
    cfg.dim = dim;
    cfg.noise_sd = noise_sd;
    cfg.seed = seed;
    const auto data = f2b::make_synthetic(cfg);
    f2b::save_metadata(metadata_out, data.records);
    f2b::write_embeddings(embeddings_out, data.embeddings);
  });
}

f2b_status f2b_split_across_people(const f2b_dataset* ds, double test_fraction, uint64_t seed, f2b_split** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(out, "out");
    *out = new f2b_split{f2b::split_across_people(ds->ds, test_fraction, seed)};
  });
}

f2b_status f2b_split_across_people_count(const f2b_dataset* ds, size_t test_records, uint64_t seed,
                                         f2b_split** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(out, "out");
    *out = new f2b_split{f2b::split_across_people_count(ds->ds, test_records, seed)};
  });
}

f2b_status f2b_split_within_person(const f2b_dataset* ds, size_t n_test, uint64_t seed, f2b_split** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(out, "out");
    *out = new f2b_split{f2b::split_within_person(ds->ds, n_test, seed)};
  });
}

f2b_status f2b_split_load(const char* path, f2b_split** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new f2b_split{f2b::load_split(path)};
  });
}

f2b_status f2b_split_save(const f2b_split* split, const char* path) {
  return guarded([&] {
    require(split, "split");
    require(path, "path");
    f2b::save_split(path, split->plan);
  });
}

void f2b_split_free(f2b_split* split) { delete split; }

size_t f2b_split_train_size(const f2b_split* split) { return split ? split->plan.train_ids.size() : 0; }

size_t f2b_split_test_size(const f2b_split* split) { return split ? split->plan.test_ids.size() : 0; }

f2b_protocol f2b_split_protocol(const f2b_split* split) {
  return split && split->plan.protocol == f2b::SplitProtocol::WithinPerson ? F2B_WITHIN_PERSON
                                                                           : F2B_ACROSS_PEOPLE;
}

f2b_status f2b_split_check(const f2b_dataset* ds, const f2b_split* split) {
  return guarded([&] {
    require(ds, "dataset");
    require(split, "split");
    const auto violation = f2b::check_split(ds->ds, split->plan);
    if (!violation.empty()) f2b::fail(f2b::ErrorKind::Validation, violation);
  });
}

void f2b_train_options_default(f2b_train_options* opts) {
  if (!opts) return;
  const f2b::SvrHyperParams defaults;
  opts->kernel = F2B_KERNEL_LINEAR;
  opts->gamma = 0.0;
  opts->c = defaults.c;
  opts->epsilon = defaults.epsilon;
  opts->tolerance = defaults.tolerance;
  opts->max_passes = defaults.max_passes;
  opts->seed = 42;
}

f2b_status f2b_train(const f2b_dataset* ds, const f2b_split* split, const f2b_train_options* opts,
                     f2b_model** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(opts, "options");
    require(out, "out");
    f2b::KernelSpec kernel;
    if (opts->kernel == F2B_KERNEL_LINEAR) kernel = f2b::KernelSpec::linear();
    else if (opts->kernel == F2B_KERNEL_RBF) kernel = f2b::KernelSpec::rbf(opts->gamma);
    else f2b::fail(f2b::ErrorKind::Validation, "unknown kernel");
    f2b::SvrHyperParams params;
    params.c = opts->c;
    params.epsilon = opts->epsilon;
    params.tolerance = opts->tolerance;
    params.max_passes = opts->max_passes;
    const auto ids = split ? split->plan.train_ids : all_ids(ds->ds);
    *out = new f2b_model{f2b::train(ds->ds, ids, kernel, params, opts->seed)};
  });
}

f2b_status f2b_model_load(const char* path, f2b_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new f2b_model{f2b::load_model(path)};
  });
}

f2b_status f2b_model_save(const f2b_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    f2b::save_model(path, model->model);
  });
}

void f2b_model_free(f2b_model* model) { delete model; }

size_t f2b_model_dim(const f2b_model* model) { return model ? model->model.dim : 0; }

size_t f2b_model_support_size(const f2b_model* model) { return model ? model->model.support.size() : 0; }

double f2b_model_bias(const f2b_model* model) { return model ? model->model.bias : 0.0; }

int f2b_model_normalized(const f2b_model* model) { return model && model->model.normalize ? 1 : 0; }

f2b_status f2b_model_predict(const f2b_model* model, const double* x, size_t dim, double* out_bmi) {
  return guarded([&] {
    require(model, "model");
    require(x, "x");
    require(out_bmi, "out_bmi");
    std::vector<double> v(x, x + dim);
    if (model->model.normalize) f2b::normalize_unit(v);
    *out_bmi = f2b::predict(model->model, v);
  });
}

f2b_status f2b_predict_embeddings(const f2b_model* model, const char* embeddings_f2be, const char* out_csv) {
  return guarded([&] {
    require(model, "model");
    require(embeddings_f2be, "embeddings path");
    require(out_csv, "output path");
    const auto vectors = f2b::read_embeddings(embeddings_f2be);
    std::ofstream out(out_csv, std::ios::binary);
    if (!out) f2b::fail(f2b::ErrorKind::Io, std::string("cannot write ") + out_csv);
    out << "record_id,predicted_bmi\n";
    for (const auto& [id, v] : vectors) {
      std::vector<double> x(v.values.begin(), v.values.end());
      if (model->model.normalize) f2b::normalize_unit(x);
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof buf, f2b::predict(model->model, x));
      out << id << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
    }
    if (!out) f2b::fail(f2b::ErrorKind::Io, std::string("write failed for ") + out_csv);
  });
}

f2b_status f2b_evaluate(const f2b_model* model, const f2b_dataset* ds, const f2b_split* split, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(ds, "dataset");
    require(split, "split");
    require(out_json, "out_json");
    f2b::EvalReport report;
    report.regression = f2b::evaluate_regression(model->model, ds->ds, split->plan);
    *out_json = dup_string(f2b::eval_report_to_json(report));
  });
}

f2b_status f2b_pairs_generate(const f2b_dataset* ds, const f2b_split* split, size_t per_category, uint64_t seed,
                              f2b_pairs** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(out, "out");
    const auto pool = split ? split->plan.test_ids : all_ids(ds->ds);
    *out = new f2b_pairs{f2b::generate_pairs(ds->ds, pool, per_category, seed)};
  });
}

void f2b_pairs_free(f2b_pairs* pairs) { delete pairs; }

size_t f2b_pairs_size(const f2b_pairs* pairs) { return pairs ? pairs->pairs.size() : 0; }

f2b_status f2b_pairs_to_json(const f2b_pairs* pairs, char** out_json) {
  return guarded([&] {
    require(pairs, "pairs");
    require(out_json, "out_json");
    *out_json = dup_string(f2b::pairs_to_json(pairs->pairs));
  });
}

f2b_status f2b_pairs_export_questionnaire(const f2b_pairs* pairs, const char* path, uint64_t seed) {
  return guarded([&] {
    require(pairs, "pairs");
    require(path, "path");
    f2b::export_questionnaire(pairs->pairs, path, seed);
  });
}

f2b_status f2b_pairs_report(const f2b_pairs* pairs, const f2b_dataset* ds, const f2b_model* model,
                            const char* answer_key, const char* human_answers, char** out_json) {
  return guarded([&] {
    require(pairs, "pairs");
    require(ds, "dataset");
    require(out_json, "out_json");
    f2b::EvalReport report;
    if (model) report.machine = f2b::answer_pairs(ds->ds, pairs->pairs, f2b::model_predictor(model->model, ds->ds));
    if (answer_key && human_answers) report.human = f2b::score_human_answers(answer_key, human_answers);
    *out_json = dup_string(f2b::eval_report_to_json(report));
  });
}

f2b_status f2b_bias_audit(const f2b_dataset* ds, const f2b_split* split, const f2b_model* model,
                          const f2b_audit_options* opts, char** out_json, char** out_summary) {
  return guarded([&] {
    require(ds, "dataset");
    require(model, "model");
    require(opts, "options");
    require(opts->group_x, "group_x");
    require(opts->group_y, "group_y");
    require(out_json, "out_json");
    std::vector<std::string> pool;
    std::string pool_name;
    if (!split) {
      pool = all_ids(ds->ds);
      pool_name = "all";
    } else {
      pool = split->plan.test_ids;
      pool_name = "test";
      if (opts->include_train) {
        pool.insert(pool.end(), split->plan.train_ids.begin(), split->plan.train_ids.end());
        pool_name = "test+train";
      }
    }
    const auto attr = opts->group_attr == F2B_GROUP_RACE ? f2b::GroupAttr::Race : f2b::GroupAttr::Gender;
    const auto pairs =
        f2b::build_audit_pairs(ds->ds, pool, attr, opts->group_x, opts->group_y, opts->n_pairs, opts->seed);
    auto report = f2b::run_audit(ds->ds, pairs, f2b::model_predictor(model->model, ds->ds));
    report.pool = pool_name;
    report.seed = opts->seed;
    auto json = dup_string(f2b::audit_report_to_json(report));
    if (out_summary) {
      try {
        *out_summary = dup_string(f2b::audit_summary(report));
      } catch (...) {
        std::free(json);
        throw;
      }
    }
    *out_json = json;
  });
}

f2b_status f2b_binomial_test(uint64_t k, uint64_t n, double p0, double* p_one_sided, double* p_two_sided) {
  return guarded([&] {
    require(p_one_sided, "p_one_sided");
    require(p_two_sided, "p_two_sided");
    const auto t = f2b::binomial_test(k, n, p0);
    *p_one_sided = t.p_one_sided;
    *p_two_sided = t.p_two_sided;
  });
}

}  // extern "C"
