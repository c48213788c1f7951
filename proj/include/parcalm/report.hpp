#pragma once

#include <json.hpp>

#include "parcalm/calmness.hpp"
#include "parcalm/classifier.hpp"
#include "parcalm/continuation.hpp"
#include "parcalm/corpus.hpp"
#include "parcalm/multipliers.hpp"
#include "parcalm/stationarity.hpp"

namespace parcalm {

using Json = nlohmann::ordered_json;

// JSON views of the library reports. Vectors become arrays, matrices
// arrays of rows, constraint indices "g1".."gp", non-finite numbers null.

Json to_json(const Vec& v);
Json to_json(const Mat& A);
Json constraint_names(const std::vector<int>& idx);
Json to_json(const Tolerances& t);
Json to_json(const MultiplierSet& s);
Json to_json(const StationarityFlags& f);
Json to_json(const NDReport& nd);
Json to_json(const ClassificationReport& c);
Json to_json(const CurveSegment& c);
Json to_json(const LowerSolution& s);
Json to_json(const SolutionMap& s);
Json to_json(const MpccLicqReport& r);
Json to_json(const StationarityReport& r);
Json to_json(const PEBReport& r);
Json to_json(const CalmnessReport& r);
Json to_json(const FjMinReport& r);
Json to_json(const BilevelSolution& s);
Json to_json(const CorpusSummary& s);

}  // namespace parcalm
