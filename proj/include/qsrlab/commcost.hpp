#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qsrlab::commcost {

struct CommEstimate {
  double comm_hours = 0.0;
  double comp_hours = 0.0;
  bool negative_comm = false;  // measurement noise flag; value kept as-is
};

/// Splits the data-parallel total into communication and computation from
/// two measured totals: comm = H1/(H1-1) * (T_para - T_H1), comp = rest.
CommEstimate estimate_comm_time(double t_tot_para_hours,
                                double t_tot_h1_hours, std::int64_t h1);

/// Predicted total for synchronization period h2: comm/h2 + comp.
double predict_total(double t_comm_para_hours, double t_comp_para_hours,
                     double h2);

/// Communication time at a relative communication volume f in (0, 1].
double qsr_comm_time(double fraction, double t_comm_para_hours);

struct Prediction {
  double h2 = 1.0;
  double total_hours = 0.0;
};

struct FractionEntry {
  std::string label;
  double fraction = 1.0;
  double comm_hours = 0.0;
};

/// Inputs plus everything derived from them; rounds to 0.1 h only at
/// presentation time.
struct CommLedger {
  double t_tot_para_hours = 0.0;
  double t_tot_h1_hours = 0.0;
  std::int64_t h1 = 2;
  CommEstimate estimate;
  std::vector<Prediction> predictions;
  std::vector<FractionEntry> fractions;
};

CommLedger build_ledger(double t_tot_para_hours, double t_tot_h1_hours,
                        std::int64_t h1, const std::vector<double>& h2_values,
                        const std::vector<std::pair<std::string, double>>&
                            rule_fractions);

}  // namespace qsrlab::commcost
