#pragma once

// JSON documents for models, jobs, results and traces. Doubles are written
// in shortest round-trip form, so parse(dump(x)) reproduces every bit.
// Non-finite doubles are written as the strings "inf", "-inf" and "nan".

#include "json.hpp"

#include "distpre/customizer.hpp"
#include "distpre/data.hpp"
#include "distpre/hyperparams.hpp"
#include "distpre/lstm.hpp"
#include "distpre/metrics.hpp"
#include "distpre/nmm.hpp"

namespace distpre {

using nlohmann::json;

json number_to_json(double v);
double number_from_json(const json& j);

void to_json(json& j, const HyperparameterSetting& s);
void from_json(const json& j, HyperparameterSetting& s);
void to_json(json& j, const GridSpec& g);
void from_json(const json& j, GridSpec& g);
void to_json(json& j, const NmmConfig& c);
void from_json(const json& j, NmmConfig& c);
void to_json(json& j, const TrainingConfig& c);
void from_json(const json& j, TrainingConfig& c);
void to_json(json& j, const NormalizedSeries& s);
void from_json(const json& j, NormalizedSeries& s);
void to_json(json& j, const DatasetSplit& s);
void from_json(const json& j, DatasetSplit& s);
void to_json(json& j, const EvaluationReport& r);
void from_json(const json& j, EvaluationReport& r);
void to_json(json& j, const TraceRecord& r);
void from_json(const json& j, TraceRecord& r);
void to_json(json& j, const SearchTrace& t);
void from_json(const json& j, SearchTrace& t);
void to_json(json& j, const CustomizationJob& job);
void from_json(const json& j, CustomizationJob& job);
void to_json(json& j, const CustomizationResult& r);
void from_json(const json& j, CustomizationResult& r);

// Model document; throws FormatError on a format_version mismatch or a
// malformed document.
json model_to_json(const LstmModel& m);
LstmModel model_from_json(const json& j);

}  // namespace distpre
