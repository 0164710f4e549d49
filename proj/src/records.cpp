#include "nmc/records.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nmc {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("double format failed");
  return std::string(buf, ptr);
}

std::string format_energy(double v) {
  if (std::floor(v) == v && std::abs(v) < 9.0e15)
    return std::to_string(int64_t(v));
  return format_double(v);
}

namespace {

constexpr const char* kRecordsSchema = "#nmc-records v1";
constexpr const char* kRecordsHeader =
    "instance,replica,min_energy,first_success_mcs,total_mcs,best_assignment";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string assignment_to_string(const Assignment& a) {
  std::string s(a.size(), '0');
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i]) s[i] = '1';
  return s;
}

Assignment assignment_from_string(const std::string& s) {
  Assignment a(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1')
      throw std::runtime_error("bad assignment bit string");
    a[i] = s[i] == '1';
  }
  return a;
}

}  // namespace

void write_records(std::ostream& out, const std::vector<RunRecord>& records,
                   const Metadata& meta) {
  out << kRecordsSchema << "\n";
  for (const auto& [k, v] : meta) out << "#" << k << "=" << v << "\n";
  out << kRecordsHeader << "\n";
  write_records_rows(out, records);
}

void write_records_rows(std::ostream& out,
                        const std::vector<RunRecord>& records) {
  for (const RunRecord& r : records) {
    out << r.instance << ',' << r.replica << ',' << format_energy(r.min_energy)
        << ',';
    if (r.first_success_mcs) out << *r.first_success_mcs;
    out << ',' << r.total_mcs << ',' << assignment_to_string(r.best_assignment)
        << "\n";
  }
}

std::vector<RunRecord> read_records(std::istream& in, Metadata* meta) {
  std::string line;
  if (!std::getline(in, line) || line != kRecordsSchema)
    throw std::runtime_error(
        "unknown record schema (expected `" + std::string(kRecordsSchema) +
        "`, got `" + line + "`)");
  std::vector<RunRecord> records;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      size_t eq = line.find('=');
      if (meta && eq != std::string::npos)
        (*meta)[line.substr(1, eq - 1)] = line.substr(eq + 1);
      continue;
    }
    if (!header_seen) {
      if (line != kRecordsHeader)
        throw std::runtime_error("unexpected records header: " + line);
      header_seen = true;
      continue;
    }
    auto f = split_csv(line);
    if (f.size() != 6) throw std::runtime_error("bad record row: " + line);
    RunRecord r;
    r.instance = f[0];
    r.replica = std::stoi(f[1]);
    r.min_energy = std::stod(f[2]);
    if (!f[3].empty()) r.first_success_mcs = std::stoull(f[3]);
    r.total_mcs = std::stoull(f[4]);
    r.best_assignment = assignment_from_string(f[5]);
    records.push_back(std::move(r));
  }
  return records;
}

void write_jump_stats(std::ostream& out, const std::string& instance,
                      const std::vector<std::vector<JumpStatsRow>>& per_replica,
                      bool with_header) {
  if (with_header) {
    out << "#nmc-jumpstats v1\n";
    out << "instance,replica,step,backbone_fraction,distance,delta_e\n";
  }
  for (size_t r = 0; r < per_replica.size(); ++r) {
    for (const JumpStatsRow& row : per_replica[r]) {
      out << instance << ',' << r << ',' << row.step << ','
          << format_double(row.backbone_fraction) << ','
          << format_double(row.distance) << ',' << format_energy(row.delta_e)
          << "\n";
    }
  }
}

void write_trace_rows(std::ostream& out, const std::string& instance,
                      int replica, const std::vector<TraceRow>& rows,
                      bool with_header) {
  if (with_header) {
    out << "#nmc-trace v1\n";
    out << "instance,replica,window,mcs,basin_energy,dist_to_best\n";
  }
  for (const TraceRow& row : rows) {
    out << instance << ',' << replica << ',' << row.window << ',' << row.mcs
        << ',' << format_energy(row.basin_energy) << ','
        << format_double(row.dist_to_best) << "\n";
  }
}

void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& rows) {
  out << "#nmc-trainlog v1\n";
  out << "update,mean_reward,policy_loss,value_loss,entropy,learning_rate,"
         "grad_norm,max_ratio_dev_first_batch,mean_mask_fraction\n";
  for (const TrainLogRow& r : rows) {
    out << r.update << ',' << format_double(r.mean_reward) << ','
        << format_double(r.policy_loss) << ',' << format_double(r.value_loss)
        << ',' << format_double(r.entropy) << ','
        << format_double(r.learning_rate) << ',' << format_double(r.grad_norm)
        << ',' << format_double(r.max_ratio_dev_first_batch) << ','
        << format_double(r.mean_mask_fraction) << "\n";
  }
}

}  // namespace nmc
