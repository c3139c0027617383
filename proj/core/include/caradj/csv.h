#ifndef CARADJ_CSV_H_
#define CARADJ_CSV_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "caradj/data_model.h"

namespace caradj {

// Raw RFC-4180 table: header plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws InputError when absent.
  int Column(const std::string& name) const;
};

CsvTable ParseCsv(std::istream& in);
CsvTable ReadCsvFile(const std::string& path);

// Column roles for LoadCsv.
struct CsvSchema {
  std::string response;
  std::string arm;
  std::vector<std::string> strata;      // cross-classified into joint levels
  std::vector<std::string> covariates;  // numeric columns
  std::vector<std::string> one_hot;     // categorical, expanded to indicators
  // Allocation proportions; empty means equal allocation over `arms` arms.
  std::vector<double> pi;
  // Number of arms; 0 means len(pi), or the largest arm value when pi is
  // also empty.
  int arms = 0;
};

TrialDataset LoadCsv(const std::string& path, const CsvSchema& schema);
TrialDataset LoadCsv(const CsvTable& table, const CsvSchema& schema);

// Canonical re-emission: columns response, arm (1-based), stratum (joint
// label), then covariates, with doubles printed round-trip exact. Loading
// the emitted text with CanonicalSchema() and emitting again is byte-stable.
std::string EmitCanonicalCsv(const TrialDataset& d);
CsvSchema CanonicalSchema(const TrialDataset& d);

std::string FormatDouble(double v);

}  // namespace caradj

#endif  // CARADJ_CSV_H_
