#include "midistyle/eval.hpp"

#include <algorithm>
#include <cstdio>

namespace midistyle {

namespace {

std::string fmt(const char* format, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

}  // namespace

const char* task_name(TransferTask task) {
  return task == TransferTask::Jazz2Classic ? "j2c" : "c2j";
}

TransferTask task_from_name(const std::string& name) {
  if (name == "j2c") return TransferTask::Jazz2Classic;
  if (name == "c2j") return TransferTask::Classic2Jazz;
  raise(errc::invalid_argument,
        "unknown task '" + name + "', expected j2c or c2j");
}

GenreLabel task_source(TransferTask task) {
  return task == TransferTask::Jazz2Classic ? GenreLabel::Jazz
                                            : GenreLabel::Classic;
}

GenreLabel task_target(TransferTask task) {
  return task == TransferTask::Jazz2Classic ? GenreLabel::Classic
                                            : GenreLabel::Jazz;
}

double transfer_accuracy(const RollTransfer& transfer, const RollJudge& judge,
                         const std::vector<PianoRoll>& source_test,
                         TransferTask task, double threshold) {
  require(!source_test.empty(), errc::empty_test_set,
          "transfer accuracy needs at least one test roll");
  const GenreLabel target = task_target(task);
  size_t hits = 0;
  for (const PianoRoll& roll : source_test) {
    const PianoRoll out = binarize(transfer(roll), threshold);
    if (judge(out) == target) ++hits;
  }
  return 100.0 * static_cast<double>(hits) /
         static_cast<double>(source_test.size());
}

RollJudge classifier_judge(const Classifier& judge) {
  require(judge.n_features() == kFeatureDim, errc::layout_mismatch,
          "judge classifier was fitted on a different feature layout");
  return [&judge](const PianoRoll& roll) {
    return judge.predict(featurize(roll));
  };
}

RollJudge oracle_judge(const SyntheticSpec& spec) {
  return [spec](const PianoRoll& roll) {
    return pitch_band_oracle(spec, roll);
  };
}

double transfer_accuracy(const TransferModel& model, const Classifier& judge,
                         const std::vector<PianoRoll>& source_test,
                         TransferTask task, double threshold) {
  const Generator& gen =
      task == TransferTask::Jazz2Classic ? model.g_a2b : model.g_b2a;
  const RollTransfer transfer = [&gen](const PianoRoll& roll) {
    return gen.transfer_roll(roll);
  };
  return transfer_accuracy(transfer, classifier_judge(judge), source_test,
                           task, threshold);
}

std::string EvalReport::to_csv() const {
  std::string out = "variant,task,accuracy,count\n";
  for (const EvalRow& row : rows) {
    out += row.variant;
    out += ',';
    out += task_name(row.task);
    out += ',';
    out += fmt("%.17g", row.accuracy);
    out += ',';
    out += std::to_string(row.count);
    out += '\n';
  }
  return out;
}

std::string EvalReport::to_table() const {
  size_t name_width = 7;  // "variant"
  for (const EvalRow& row : rows) {
    name_width = std::max(name_width, row.variant.size());
  }
  std::string out = "judge: " + judge_id + "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-*s  %-4s  %8s  %6s\n",
                static_cast<int>(name_width), "variant", "task", "acc(%)",
                "count");
  out += line;
  for (const EvalRow& row : rows) {
    std::snprintf(line, sizeof line, "%-*s  %-4s  %8.1f  %6zu\n",
                  static_cast<int>(name_width), row.variant.c_str(),
                  task_name(row.task), row.accuracy, row.count);
    out += line;
  }
  return out;
}

EvalReport build_report(
    const std::vector<std::pair<std::string, const TransferModel*>>& variants,
    const Classifier& judge, const std::vector<PianoRoll>& test_a,
    const std::vector<PianoRoll>& test_b, double threshold) {
  require(!variants.empty(), errc::invalid_argument,
          "report needs at least one model variant");
  EvalReport report;
  report.judge_id = ClassifierSpec::kind_name(judge.spec().kind);
  for (const auto& [name, model] : variants) {
    require(model != nullptr, errc::invalid_argument,
            "report received a null model");
    for (TransferTask task :
         {TransferTask::Jazz2Classic, TransferTask::Classic2Jazz}) {
      const std::vector<PianoRoll>& source =
          task == TransferTask::Jazz2Classic ? test_a : test_b;
      EvalRow row;
      row.variant = name;
      row.task = task;
      row.accuracy =
          transfer_accuracy(*model, judge, source, task, threshold);
      row.count = source.size();
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace midistyle
