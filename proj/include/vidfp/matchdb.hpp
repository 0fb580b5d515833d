#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vidfp/fingerprint.hpp"

namespace vidfp {

struct FingerprintRecord {
  std::string id;
  Fingerprint fingerprint;
  std::map<std::string, std::string> meta;
};

/// One-line JSON rendering with doubles at 17 significant digits, so records
/// round-trip float-exactly and repeated save/load cycles are byte-stable.
std::string recordToJsonLine(const FingerprintRecord& record);
FingerprintRecord recordFromJsonLine(const std::string& line);

/// Fingerprint store with an in-memory index on the match tag. Persists as
/// JSON lines: a {version, config_digest} header line followed by one record
/// per line. Saves go through a temp file and rename.
class Database {
 public:
  explicit Database(std::string config_digest);

  const std::string& configDigest() const { return config_digest_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<FingerprintRecord>& records() const { return records_; }

  /// Rejects duplicate ids and fingerprints from a different configuration;
  /// the database is unchanged on error.
  void insert(FingerprintRecord record);

  /// Indices of records whose tag lies in [tag - a*|tag|, tag + a*|tag|],
  /// both ends inclusive. The candidate set grows with a.
  std::vector<std::size_t> preMatch(double query_tag, double a) const;

  static Database load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::string config_digest_;
  std::vector<FingerprintRecord> records_;
  std::vector<std::pair<double, std::size_t>> tag_index_;  // sorted by tag
  std::set<std::string> ids_;
};

/// Euclidean distance; requires equal lengths and matching config digests.
double l2Distance(const Fingerprint& a, const Fingerprint& b);

enum class Decision { Copy, Different };

/// Copy iff distance <= tau (boundary inclusive).
Decision decideCopy(double distance, double tau);

struct SearchHit {
  std::string id;
  double distance = 0.0;
  Decision decision = Decision::Different;
};

/// Tag pre-match followed by exhaustive L2 over the candidates, ascending
/// distance (ties by id). `exhaustive` bypasses the pre-match to scan every
/// record, which serves as the ground-truth mode.
std::vector<SearchHit> search(const Database& db, const Fingerprint& query, double a,
                              double tau, bool exhaustive = false);

struct LabeledQuery {
  Fingerprint fingerprint;
  std::vector<std::string> positive_ids;
};

struct CalibrationPoint {
  double a = 0.0;
  double ps = 0.0;   // fraction of true near-duplicates retained by the pre-match
  double pnd = 0.0;  // fraction of non-duplicates excluded by the pre-match
};

struct CalibrationCurve {
  std::vector<CalibrationPoint> samples;  // ascending in a
  double chosen_a = 0.0;
};

/// Sweeps the adjustment factor over the grid. The chosen value is the
/// smallest grid point with ps >= 0.95; when none qualifies it falls back to
/// the point where the ps and pnd curves cross.
CalibrationCurve calibrateAdjustmentFactor(const Database& db,
                                           const std::vector<LabeledQuery>& queries,
                                           std::vector<double> a_grid);

struct ThresholdModel {
  double mu_v = 0.0;
  double sigma_v = 0.0;
  double mu_w = 0.0;
  double sigma_w = 0.0;
  double tau = 0.0;
};

/// Maximum-likelihood Gaussian fits (mean, population standard deviation)
/// for the copy distances v and the non-copy distances w, with tau at the
/// density crossing between the two means. Requires mu_v < mu_w.
ThresholdModel fitThreshold(const std::vector<double>& v_samples,
                            const std::vector<double>& w_samples);

void writeCalibrationCsv(const std::filesystem::path& path, const CalibrationCurve& curve);
void writeThresholdCsv(const std::filesystem::path& path, const ThresholdModel& model);

}  // namespace vidfp
