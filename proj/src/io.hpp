#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "spillfree/controller.hpp"
#include "spillfree/solver.hpp"
#include "spillfree/verify.hpp"

namespace spillfree::cli {

/// Shortest text that round-trips the double exactly.
std::string format_double(double x);

/// Write via a temp file in the same directory plus rename, so readers never
/// observe a partial file and re-runs are byte-for-byte reproducible.
void write_file_atomic(const std::string& path, const std::string& content);

extern const char* kTimeSeriesHeader;  // the fixed time-series column contract

std::string records_to_csv(const std::vector<StepRecord>& records);
std::vector<StepRecord> read_records_csv(const std::string& path);

std::string snapshot_to_csv(const Snapshot& snap, const Grid& grid);
std::string snapshot_filename(double t_requested);

nlohmann::json report_to_json(const CheckReport& r);
nlohmann::json constants_to_json(const DerivedConstants& d);
nlohmann::json gains_to_json(const Gains& g);
nlohmann::json plan_to_json(const TransferPlan& plan);

}  // namespace spillfree::cli
