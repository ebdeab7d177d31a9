#include "qsrlab/commcost.hpp"

#include <stdexcept>
#include <utility>

namespace qsrlab::commcost {

CommEstimate estimate_comm_time(double t_tot_para_hours, double t_tot_h1_hours,
                                std::int64_t h1) {
  if (h1 < 2) throw std::invalid_argument("h1 must be >= 2");
  const double ratio =
      static_cast<double>(h1) / (static_cast<double>(h1) - 1.0);
  CommEstimate est;
  est.comm_hours = ratio * (t_tot_para_hours - t_tot_h1_hours);
  est.comp_hours = t_tot_para_hours - est.comm_hours;
  est.negative_comm = est.comm_hours < 0.0;
  return est;
}

double predict_total(double t_comm_para_hours, double t_comp_para_hours,
                     double h2) {
  if (!(h2 >= 1.0)) throw std::invalid_argument("h2 must be >= 1");
  return t_comm_para_hours / h2 + t_comp_para_hours;
}

double qsr_comm_time(double fraction, double t_comm_para_hours) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("fraction must be in (0, 1]");
  return fraction * t_comm_para_hours;
}

CommLedger build_ledger(double t_tot_para_hours, double t_tot_h1_hours,
                        std::int64_t h1, const std::vector<double>& h2_values,
                        const std::vector<std::pair<std::string, double>>&
                            rule_fractions) {
  CommLedger ledger;
  ledger.t_tot_para_hours = t_tot_para_hours;
  ledger.t_tot_h1_hours = t_tot_h1_hours;
  ledger.h1 = h1;
  ledger.estimate = estimate_comm_time(t_tot_para_hours, t_tot_h1_hours, h1);
  for (double h2 : h2_values) {
    ledger.predictions.push_back(
        {h2, predict_total(ledger.estimate.comm_hours,
                           ledger.estimate.comp_hours, h2)});
  }
  for (const auto& [label, fraction] : rule_fractions) {
    ledger.fractions.push_back(
        {label, fraction,
         qsr_comm_time(fraction, ledger.estimate.comm_hours)});
  }
  return ledger;
}

}  // namespace qsrlab::commcost
