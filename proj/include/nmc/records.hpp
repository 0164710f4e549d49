#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nmc/problem.hpp"

namespace nmc {

// Outcome of one replica run; the unit all metrics aggregate over.
struct RunRecord {
  std::string instance;
  int replica = 0;
  double min_energy = 0.0;
  std::optional<uint64_t> first_success_mcs;
  uint64_t total_mcs = 0;
  Assignment best_assignment;
};

struct JumpStatsRow {
  int step = 0;
  double backbone_fraction = 0.0;
  double distance = 0.0;
  double delta_e = 0.0;
};

struct TraceRow {
  int window = 0;
  uint64_t mcs = 0;
  double basin_energy = 0.0;
  double dist_to_best = 0.0;
};

struct TrainLogRow {
  int update = 0;
  double mean_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double learning_rate = 0.0;
  double grad_norm = 0.0;
  double max_ratio_dev_first_batch = 0.0;
  double mean_mask_fraction = 0.0;
};

using Metadata = std::map<std::string, std::string>;

// Line-delimited record streams: a `#nmc-<kind> v1` schema line, optional
// `#key=value` provenance comments, a CSV header row, then one row per record.
void write_records(std::ostream& out, const std::vector<RunRecord>& records,
                   const Metadata& meta = {});
// Appends rows to an already-started stream (no schema/header lines).
void write_records_rows(std::ostream& out,
                        const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records(std::istream& in, Metadata* meta = nullptr);

void write_jump_stats(std::ostream& out, const std::string& instance,
                      const std::vector<std::vector<JumpStatsRow>>& per_replica,
                      bool with_header);
void write_trace_rows(std::ostream& out, const std::string& instance,
                      int replica, const std::vector<TraceRow>& rows,
                      bool with_header);
void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& rows);

std::string format_double(double v);
std::string format_energy(double v);  // integers printed without a decimal point

}  // namespace nmc
