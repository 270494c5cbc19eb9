#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "midistyle/classify.hpp"
#include "midistyle/dataset.hpp"
#include "midistyle/nets.hpp"
#include "midistyle/pianoroll.hpp"

namespace midistyle {

// A translation direction. Domain A is Jazz, domain B is Classic, so
// Jazz2Classic exercises G_A2B and Classic2Jazz exercises G_B2A.
enum class TransferTask { Jazz2Classic, Classic2Jazz };

const char* task_name(TransferTask task);  // "j2c" / "c2j"
TransferTask task_from_name(const std::string& name);
GenreLabel task_source(TransferTask task);
GenreLabel task_target(TransferTask task);

using RollTransfer = std::function<PianoRoll(const PianoRoll&)>;
using RollJudge = std::function<GenreLabel(const PianoRoll&)>;

// Percentage of source-domain test rolls that, after transfer and
// binarization at `threshold`, the judge assigns to the target genre.
double transfer_accuracy(const RollTransfer& transfer, const RollJudge& judge,
                         const std::vector<PianoRoll>& source_test,
                         TransferTask task, double threshold = 0.5);

// Judge adapters.
RollJudge classifier_judge(const Classifier& judge);
RollJudge oracle_judge(const SyntheticSpec& spec);

// Convenience overload: the task picks the model's generator, the
// classifier plays judge on the featurized binary roll.
double transfer_accuracy(const TransferModel& model, const Classifier& judge,
                         const std::vector<PianoRoll>& source_test,
                         TransferTask task, double threshold = 0.5);

struct EvalRow {
  std::string variant;
  TransferTask task = TransferTask::Jazz2Classic;
  double accuracy = 0.0;  // percent
  size_t count = 0;       // test rolls scored
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string judge_id;

  std::string to_csv() const;    // full-precision machine form
  std::string to_table() const;  // aligned human-readable form
};

// One row per (variant, task), tasks ordered J2C then C2J, variants kept
// in their given order. test_a holds Jazz source rolls, test_b Classic.
EvalReport build_report(
    const std::vector<std::pair<std::string, const TransferModel*>>& variants,
    const Classifier& judge, const std::vector<PianoRoll>& test_a,
    const std::vector<PianoRoll>& test_b, double threshold = 0.5);

}  // namespace midistyle
