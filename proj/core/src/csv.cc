#include "caradj/csv.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "caradj/error.h"

namespace caradj {
namespace {

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

double ParseNumber(const std::string& cell, int row, const std::string& col) {
  const std::string t = Trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() ||
      !std::isfinite(v)) {
    throw InputError("unparsable value '" + cell + "' at row " +
                     std::to_string(row) + ", column '" + col + "'");
  }
  return v;
}

std::string Quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

int CsvTable::Column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw InputError("column '" + name + "' not found in header");
  }
  return static_cast<int>(it - header.begin());
}

CsvTable ParseCsv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char c;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // Skip blank lines.
    if (!(record.size() == 1 && record[0].empty())) {
      records.push_back(std::move(record));
    }
    record.clear();
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field += c;
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw InputError("unterminated quoted field in CSV");
  if (!field.empty() || !record.empty()) end_record();

  CsvTable table;
  if (records.empty()) throw InputError("CSV has no header row");
  // Strip a UTF-8 byte order mark from the first header cell.
  if (records[0][0].rfind("\xEF\xBB\xBF", 0) == 0) {
    records[0][0].erase(0, 3);
  }
  table.header = std::move(records[0]);
  for (auto& h : table.header) h = Trim(h);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw InputError("row " + std::to_string(r) + " has " +
                       std::to_string(records[r].size()) + " cells, expected " +
                       std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable ReadCsvFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open CSV file '" + path + "'");
  return ParseCsv(in);
}

TrialDataset LoadCsv(const std::string& path, const CsvSchema& schema) {
  return LoadCsv(ReadCsvFile(path), schema);
}

TrialDataset LoadCsv(const CsvTable& table, const CsvSchema& schema) {
  const int n = static_cast<int>(table.rows.size());
  if (n == 0) throw InputError("CSV has zero data rows");
  if (schema.response.empty() || schema.arm.empty()) {
    throw InputError("schema must name a response column and an arm column");
  }
  const int response_col = table.Column(schema.response);
  const int arm_col = table.Column(schema.arm);

  TrialDataset d;
  d.response.resize(n);
  d.arm.resize(n);
  std::vector<int> raw_arm(n);
  int max_arm = 0;
  for (int i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    d.response(i) = ParseNumber(row[response_col], i + 1, schema.response);
    const double a = ParseNumber(row[arm_col], i + 1, schema.arm);
    if (a != std::floor(a) || a < 1) {
      throw InputError("arm out of range at row " + std::to_string(i + 1));
    }
    raw_arm[i] = static_cast<int>(a);
    max_arm = std::max(max_arm, raw_arm[i]);
  }

  d.k = schema.arms > 0 ? schema.arms
        : !schema.pi.empty() ? static_cast<int>(schema.pi.size())
                             : max_arm;
  if (!schema.pi.empty()) {
    if (static_cast<int>(schema.pi.size()) != d.k) {
      throw InputError("pi has " + std::to_string(schema.pi.size()) +
                       " entries but the schema declares " +
                       std::to_string(d.k) + " arms");
    }
    d.pi = Eigen::Map<const Eigen::VectorXd>(schema.pi.data(), d.k);
  } else {
    d.pi = EqualAllocation(d.k);
  }
  for (int i = 0; i < n; ++i) {
    if (raw_arm[i] > d.k) {
      throw InputError("arm out of range at row " + std::to_string(i + 1));
    }
    d.arm[i] = raw_arm[i] - 1;
  }

  // Numeric covariates, then one-hot expansions.
  Baseline& b = d.baseline;
  std::vector<Eigen::VectorXd> columns;
  for (const auto& name : schema.covariates) {
    const int col = table.Column(name);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = ParseNumber(table.rows[i][col], i + 1, name);
    columns.push_back(std::move(v));
    b.covariate_names.push_back(name);
  }
  for (const auto& name : schema.one_hot) {
    const int col = table.Column(name);
    std::map<std::string, int> levels;
    std::vector<std::string> order;
    for (int i = 0; i < n; ++i) {
      const std::string v = Trim(table.rows[i][col]);
      if (v.empty()) {
        throw InputError("missing value at row " + std::to_string(i + 1) +
                         ", column '" + name + "'");
      }
      if (levels.try_emplace(v, static_cast<int>(order.size())).second) {
        order.push_back(v);
      }
    }
    std::vector<std::string> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    // Reference level is the lexicographically first one.
    for (std::size_t l = 1; l < sorted.size(); ++l) {
      Eigen::VectorXd v(n);
      for (int i = 0; i < n; ++i) {
        v(i) = Trim(table.rows[i][col]) == sorted[l] ? 1.0 : 0.0;
      }
      columns.push_back(std::move(v));
      b.covariate_names.push_back(name + "=" + sorted[l]);
    }
  }
  b.covariates.resize(n, static_cast<int>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) b.covariates.col(j) = columns[j];

  std::vector<std::vector<std::string>> margin_values;
  for (const auto& name : schema.strata) {
    const int col = table.Column(name);
    std::vector<std::string> values(n);
    for (int i = 0; i < n; ++i) {
      values[i] = Trim(table.rows[i][col]);
      if (values[i].empty()) {
        throw InputError("missing value at row " + std::to_string(i + 1) +
                         ", column '" + name + "'");
      }
    }
    margin_values.push_back(std::move(values));
  }
  b.stratum.assign(n, 0);
  b.margins.resize(n, 0);
  AssignJointStrata(margin_values, b);
  d.Validate();
  return d;
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string EmitCanonicalCsv(const TrialDataset& d) {
  std::ostringstream os;
  os << "response,arm,stratum";
  for (const auto& name : d.baseline.covariate_names) os << ',' << Quote(name);
  os << '\n';
  for (int i = 0; i < d.n(); ++i) {
    os << FormatDouble(d.response(i)) << ',' << d.arm[i] + 1 << ','
       << Quote(d.baseline.stratum_labels[d.baseline.stratum[i]]);
    for (int j = 0; j < d.baseline.num_covariates(); ++j) {
      os << ',' << FormatDouble(d.baseline.covariates(i, j));
    }
    os << '\n';
  }
  return os.str();
}

CsvSchema CanonicalSchema(const TrialDataset& d) {
  CsvSchema s;
  s.response = "response";
  s.arm = "arm";
  s.strata = {"stratum"};
  s.covariates = d.baseline.covariate_names;
  s.pi.assign(d.pi.data(), d.pi.data() + d.pi.size());
  s.arms = d.k;
  return s;
}

}  // namespace caradj
