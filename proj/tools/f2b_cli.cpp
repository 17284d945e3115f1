// f2b command-line driver. Everything goes through the C API in <f2b/f2b.h>.
//
// Exit codes: 0 success, 1 input fault (bad flags, files, formats), 2 the
// algorithm could not deliver (non-convergence, capacity, undefined r).

#include <f2b/f2b.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

namespace {

struct CallFailed {
  f2b_status status;
};

void check(f2b_status st) {
  if (st != F2B_OK) {
    std::cerr << "f2b: " << f2b_last_error() << "\n";
    throw CallFailed{st};
  }
}

[[noreturn]] void input_fault(const std::string& msg) {
  std::cerr << "f2b: " << msg << "\n";
  throw CallFailed{F2B_E_VALIDATION};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using DatasetPtr = std::unique_ptr<f2b_dataset, Deleter<f2b_dataset, f2b_dataset_free>>;
using SplitPtr = std::unique_ptr<f2b_split, Deleter<f2b_split, f2b_split_free>>;
using ModelPtr = std::unique_ptr<f2b_model, Deleter<f2b_model, f2b_model_free>>;
using PairsPtr = std::unique_ptr<f2b_pairs, Deleter<f2b_pairs, f2b_pairs_free>>;

struct OwnedString {
  char* s = nullptr;
  ~OwnedString() { f2b_string_free(s); }
  std::string str() const { return s ? s : ""; }
};

DatasetPtr load_dataset(const std::string& metadata, const std::string& embeddings, bool normalize) {
  f2b_dataset* raw = nullptr;
  check(f2b_dataset_load(metadata.c_str(), embeddings.c_str(), normalize ? 1 : 0, &raw));
  DatasetPtr ds(raw);
  OwnedString report;
  check(f2b_dataset_report_json(ds.get(), &report.s));
  const auto j = nlohmann::json::parse(report.str());
  const auto excluded = j["orphan_records"].size() + j["orphan_embeddings"].size() + j["incomplete_persons"].size();
  if (excluded > 0)
    std::cerr << "note: excluded " << j["orphan_records"].size() << " records without embeddings, "
              << j["orphan_embeddings"].size() << " embeddings without metadata, "
              << j["incomplete_persons"].size() << " incomplete persons\n";
  return ds;
}

SplitPtr load_split(const std::string& path) {
  f2b_split* raw = nullptr;
  check(f2b_split_load(path.c_str(), &raw));
  return SplitPtr(raw);
}

ModelPtr load_model(const std::string& path) {
  f2b_model* raw = nullptr;
  check(f2b_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) input_fault("cannot write " + path);
  out << text;
}

std::string fmt_r(const nlohmann::json& v) {
  if (v.is_null()) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v.get<double>();
  return s.str();
}

void print_regression(const nlohmann::json& j, bool per_gender) {
  std::cout << "test records: " << j["n_test"] << "\n";
  std::cout << "pearson r (overall): " << fmt_r(j["pearson_overall"]) << "\n";
  if (per_gender) {
    std::cout << std::left << std::setw(10) << "gender" << std::setw(8) << "n" << "r\n";
    std::cout << std::setw(10) << "male" << std::setw(8) << j["n_male"].get<std::size_t>() << fmt_r(j["pearson_male"])
              << "\n";
    std::cout << std::setw(10) << "female" << std::setw(8) << j["n_female"].get<std::size_t>()
              << fmt_r(j["pearson_female"]) << "\n";
  }
}

void print_pair_table(const std::string& title, const nlohmann::json& r) {
  const char* cats[] = {"male-male", "female-female", "female-male"};
  std::cout << title << " accuracy: " << fmt_r(r["pair_accuracy_overall"]["accuracy"]) << " ("
            << r["pair_accuracy_overall"]["correct"] << "/" << r["pair_accuracy_overall"]["total"] << ")\n";
  std::cout << std::left << std::setw(14) << "|dBMI|";
  for (auto c : cats) std::cout << std::setw(15) << c;
  std::cout << "\n";
  for (std::size_t b = 0; b < 15; ++b) {
    std::ostringstream label;
    label << "(" << 0.5 + static_cast<double>(b) << ", " << 1.5 + static_cast<double>(b) << "]";
    std::cout << std::setw(14) << label.str();
    for (auto c : cats) std::cout << std::setw(15) << fmt_r(r["by_category"][c]["buckets"][b]["accuracy"]);
    std::cout << "\n";
  }
  std::cout << std::setw(14) << "all";
  for (auto c : cats) std::cout << std::setw(15) << fmt_r(r["by_category"][c]["all"]["accuracy"]);
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"f2b: BMI regression from face embeddings, pairwise evaluation and bias audit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(f2b_version()));

  std::string metadata, embeddings, model_path, split_path, output;
  std::uint64_t seed = 42;

  auto data_opts = [&](CLI::App* sub, bool required) {
    auto* m = sub->add_option("--metadata", metadata, "metadata CSV");
    auto* e = sub->add_option("--embeddings", embeddings, "F2BE embedding file");
    if (required) {
      m->required();
      e->required();
    }
  };

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic cohort (metadata CSV + F2BE)");
  std::size_t persons = 200, dim = 16;
  double noise = 0.5;
  std::string metadata_out, embeddings_out;
  synth->add_option("--persons", persons, "number of persons (2 records each)")->capture_default_str();
  synth->add_option("--dim", dim, "embedding dimension")->capture_default_str();
  synth->add_option("--noise", noise, "BMI noise standard deviation")->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();
  synth->add_option("--metadata-out", metadata_out)->required();
  synth->add_option("--embeddings-out", embeddings_out)->required();

  // split
  auto* split = app.add_subcommand("split", "partition records into train and test");
  std::string protocol = "across-people";
  std::optional<double> test_fraction;
  std::optional<std::size_t> n_test;
  data_opts(split, true);
  split->add_option("--protocol", protocol)->check(CLI::IsMember({"across-people", "within-person"}))->capture_default_str();
  auto* frac_opt = split->add_option("--test-fraction", test_fraction, "across-people: share of records in test");
  auto* ntest_opt = split->add_option("--n-test", n_test, "across-people: test records; within-person: test persons");
  frac_opt->excludes(ntest_opt);
  split->add_option("--seed", seed)->capture_default_str();
  split->add_option("--output", output, "split CSV")->required();

  // train
  auto* train = app.add_subcommand("train", "fit an epsilon-SVR model");
  f2b_train_options topts;
  f2b_train_options_default(&topts);
  std::string kernel = "linear";
  bool no_normalize = false;
  data_opts(train, true);
  train->add_option("--split", split_path, "train on this split's training side (default: all records)");
  train->add_option("--kernel", kernel)->check(CLI::IsMember({"linear", "rbf"}))->capture_default_str();
  train->add_option("--gamma", topts.gamma, "rbf width; 0 = 1/dim")->capture_default_str();
  train->add_option("--c", topts.c, "box constraint")->capture_default_str();
  train->add_option("--epsilon", topts.epsilon, "tube half-width (BMI units)")->capture_default_str();
  train->add_option("--tolerance", topts.tolerance, "KKT stopping tolerance")->capture_default_str();
  train->add_option("--max-passes", topts.max_passes, "iteration cap in passes of 2n updates; 0 = 10n")
      ->capture_default_str();
  train->add_flag("--no-normalize", no_normalize, "keep raw embedding scale");
  train->add_option("--seed", seed)->capture_default_str();
  train->add_option("--output", output, "model JSON")->required();

  // predict
  auto* predict = app.add_subcommand("predict", "predict BMI for every vector of an F2BE file");
  predict->add_option("--model", model_path)->required();
  predict->add_option("--embeddings", embeddings)->required();
  predict->add_option("--output", output, "CSV record_id,predicted_bmi")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Pearson r of a model on a split's test side");
  bool per_gender = false;
  data_opts(eval, true);
  eval->add_option("--model", model_path)->required();
  eval->add_option("--split", split_path)->required();
  eval->add_flag("--per-gender", per_gender, "break r down by gender");
  eval->add_option("--output", output, "report JSON");

  // pairs
  auto* pairs = app.add_subcommand("pairs", "build the stratified pairwise comparison task");
  std::size_t per_category = 300;
  std::string questionnaire, answer_key, human_answers, pairs_out;
  data_opts(pairs, true);
  pairs->add_option("--split", split_path, "draw from this split's test side (default: all records)");
  pairs->add_option("--model", model_path, "answer the pairs with this model");
  pairs->add_option("--per-category", per_category)->capture_default_str();
  pairs->add_option("--seed", seed)->capture_default_str();
  pairs->add_option("--export-questionnaire", questionnaire, "questionnaire CSV (answer key written alongside)");
  pairs->add_option("--answer-key", answer_key, "answer key for --human-answers");
  pairs->add_option("--human-answers", human_answers, "completed answers CSV (pair_id,answer)");
  pairs->add_option("--pairs-out", pairs_out, "pair list JSON");
  pairs->add_option("--output", output, "accuracy report JSON");

  // bias
  auto* bias = app.add_subcommand("bias", "audit predictions on close-BMI cross-group pairs");
  std::string group_attr = "gender", groups = "F,M";
  std::size_t n_pairs = 2000;
  bool include_train = false;
  data_opts(bias, true);
  bias->add_option("--model", model_path)->required();
  bias->add_option("--split", split_path, "pool from this split's test side (default: all records)");
  bias->add_option("--group-attr", group_attr)->check(CLI::IsMember({"gender", "race"}))->capture_default_str();
  bias->add_option("--groups", groups, "X,Y; counts and the one-sided test refer to X")->capture_default_str();
  bias->add_option("--n-pairs", n_pairs)->capture_default_str();
  bias->add_flag("--include-train", include_train, "also draw pairs from the training side");
  bias->add_option("--seed", seed)->capture_default_str();
  bias->add_option("--output", output, "audit JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*synth) {
      check(f2b_synth_write(persons, dim, noise, seed, metadata_out.c_str(), embeddings_out.c_str()));
      std::cout << "wrote " << 2 * persons << " records to " << metadata_out << " and " << embeddings_out << "\n";
    } else if (*split) {
      auto ds = load_dataset(metadata, embeddings, false);
      f2b_split* raw = nullptr;
      if (protocol == "across-people") {
        if (n_test) check(f2b_split_across_people_count(ds.get(), *n_test, seed, &raw));
        else check(f2b_split_across_people(ds.get(), test_fraction.value_or(0.2), seed, &raw));
      } else {
        if (!n_test) input_fault("within-person split needs --n-test");
        check(f2b_split_within_person(ds.get(), *n_test, seed, &raw));
      }
      SplitPtr plan(raw);
      check(f2b_split_check(ds.get(), plan.get()));
      check(f2b_split_save(plan.get(), output.c_str()));
      std::cout << protocol << ": " << f2b_split_train_size(plan.get()) << " train, "
                << f2b_split_test_size(plan.get()) << " test -> " << output << "\n";
    } else if (*train) {
      auto ds = load_dataset(metadata, embeddings, !no_normalize);
      SplitPtr plan;
      if (!split_path.empty()) plan = load_split(split_path);
      topts.kernel = kernel == "rbf" ? F2B_KERNEL_RBF : F2B_KERNEL_LINEAR;
      topts.seed = seed;
      f2b_model* raw = nullptr;
      check(f2b_train(ds.get(), plan.get(), &topts, &raw));
      ModelPtr model(raw);
      check(f2b_model_save(model.get(), output.c_str()));
      std::cout << "trained on " << (plan ? f2b_split_train_size(plan.get()) : f2b_dataset_size(ds.get()))
                << " records: " << f2b_model_support_size(model.get()) << " support vectors, bias "
                << f2b_model_bias(model.get()) << " -> " << output << "\n";
    } else if (*predict) {
      auto model = load_model(model_path);
      check(f2b_predict_embeddings(model.get(), embeddings.c_str(), output.c_str()));
      std::cout << "predictions -> " << output << "\n";
    } else if (*eval) {
      auto model = load_model(model_path);
      auto ds = load_dataset(metadata, embeddings, f2b_model_normalized(model.get()) != 0);
      auto plan = load_split(split_path);
      OwnedString json;
      check(f2b_evaluate(model.get(), ds.get(), plan.get(), &json.s));
      print_regression(nlohmann::json::parse(json.str()), per_gender);
      if (!output.empty()) write_text(output, json.str());
    } else if (*pairs) {
      ModelPtr model;
      if (!model_path.empty()) model = load_model(model_path);
      auto ds = load_dataset(metadata, embeddings, model ? f2b_model_normalized(model.get()) != 0 : false);
      SplitPtr plan;
      if (!split_path.empty()) plan = load_split(split_path);
      f2b_pairs* raw = nullptr;
      check(f2b_pairs_generate(ds.get(), plan.get(), per_category, seed, &raw));
      PairsPtr task(raw);
      std::cout << f2b_pairs_size(task.get()) << " pairs\n";
      if (!pairs_out.empty()) {
        OwnedString json;
        check(f2b_pairs_to_json(task.get(), &json.s));
        write_text(pairs_out, json.str());
      }
      if (!questionnaire.empty()) {
        check(f2b_pairs_export_questionnaire(task.get(), questionnaire.c_str(), seed));
        std::cout << "questionnaire -> " << questionnaire << "\n";
      }
      if (!human_answers.empty() && answer_key.empty()) input_fault("--human-answers needs --answer-key");
      if (model || !human_answers.empty()) {
        OwnedString json;
        check(f2b_pairs_report(task.get(), ds.get(), model.get(), answer_key.empty() ? nullptr : answer_key.c_str(),
                               human_answers.empty() ? nullptr : human_answers.c_str(), &json.s));
        const auto j = nlohmann::json::parse(json.str());
        if (j.contains("machine")) print_pair_table("machine", j["machine"]);
        if (j.contains("human")) print_pair_table("human", j["human"]);
        if (!output.empty()) write_text(output, json.str());
      }
    } else if (*bias) {
      const auto comma = groups.find(',');
      if (comma == std::string::npos) input_fault("--groups expects X,Y");
      const auto gx = groups.substr(0, comma);
      const auto gy = groups.substr(comma + 1);
      auto model = load_model(model_path);
      auto ds = load_dataset(metadata, embeddings, f2b_model_normalized(model.get()) != 0);
      SplitPtr plan;
      if (!split_path.empty()) plan = load_split(split_path);
      f2b_audit_options opts{};
      opts.group_attr = group_attr == "race" ? F2B_GROUP_RACE : F2B_GROUP_GENDER;
      opts.group_x = gx.c_str();
      opts.group_y = gy.c_str();
      opts.n_pairs = n_pairs;
      opts.include_train = include_train ? 1 : 0;
      opts.seed = seed;
      OwnedString json, summary;
      check(f2b_bias_audit(ds.get(), plan.get(), model.get(), &opts, &json.s, &summary.s));
      std::cout << summary.str() << "\n";
      if (!output.empty()) write_text(output, json.str());
    }
  } catch (const CallFailed& e) {
    return f2b_status_is_algorithmic(e.status) ? 2 : 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "f2b: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
