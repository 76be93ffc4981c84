#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "tailkit/series.hpp"

namespace tailkit {

inline constexpr const char* kToolVersion = "0.1.0";

// CSV ingestion: header row, NA/empty missing cells, leading '#' metadata
// lines skipped; optionally derives the calendar columns from the row index.
Series ingest_csv(const std::string& path, bool calendar = false,
                  const CalendarConfig& cal = {});

// Site-group partition serialization (1-based site ids in the JSON).
nlohmann::ordered_json groups_to_json(const std::vector<std::vector<int>>& groups);
std::vector<std::vector<int>> groups_from_json(const nlohmann::json& j);

// Columns named y1, y2, ... in site order.
std::vector<std::string> detect_site_columns(const Series& s);

// Runs one of the four standing workflows:
//   c1  conditional 0.9999-quantiles with 50% bootstrap intervals
//   c2  marginal 1 - 1/60000 quantile, loss-targeted refit, 95% interval
//   c3  trivariate joint tail probabilities via min-projection
//   c4  fifty-site clustering, conditional tail models, factorized
//       year/month exceedance probabilities with bootstrap intervals
// The config is JSON; omitted keys take defaults, and the full resolved
// config is echoed into the result together with the tool version, every
// seed consumed, and collected warnings.  Reruns with an identical config
// are byte-identical.  Results for workflows with published reference
// answers embed those numbers under "reference" for side-by-side reading;
// they are fixtures, not recomputed values.
nlohmann::ordered_json run_workflow(const std::string& name,
                                    const nlohmann::json& config);

}  // namespace tailkit
