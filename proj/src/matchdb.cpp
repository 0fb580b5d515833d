#include "vidfp/matchdb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vidfp {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string quoted(const std::string& s) { return json(s).dump(); }

}  // namespace

std::string recordToJsonLine(const FingerprintRecord& record) {
  std::string line = "{\"id\":" + quoted(record.id) + ",\"y\":[";
  for (Eigen::Index i = 0; i < record.fingerprint.y.size(); ++i) {
    if (i) line += ',';
    line += g17(record.fingerprint.y[i]);
  }
  line += "],\"tag\":" + g17(record.fingerprint.tag);
  line += ",\"ranks\":[" + std::to_string(record.fingerprint.ranks[0]) + ',' +
          std::to_string(record.fingerprint.ranks[1]) + ',' +
          std::to_string(record.fingerprint.ranks[2]) + ']';
  line += ",\"config_digest\":" + quoted(record.fingerprint.config_digest);
  if (!record.meta.empty()) {
    line += ",\"meta\":{";
    bool first = true;
    for (const auto& [key, value] : record.meta) {
      if (!first) line += ',';
      first = false;
      line += quoted(key) + ':' + quoted(value);
    }
    line += '}';
  }
  line += '}';
  return line;
}

FingerprintRecord recordFromJsonLine(const std::string& line) {
  const json j = json::parse(line);
  FingerprintRecord record;
  record.id = j.at("id").get<std::string>();
  const auto& y = j.at("y");
  record.fingerprint.y.resize(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i)
    record.fingerprint.y[static_cast<Eigen::Index>(i)] = y[i].get<double>();
  record.fingerprint.tag = j.at("tag").get<double>();
  const auto& ranks = j.at("ranks");
  if (ranks.size() != 3) throw std::runtime_error("record needs exactly 3 ranks");
  for (int n = 0; n < 3; ++n)
    record.fingerprint.ranks[n] = ranks[static_cast<std::size_t>(n)].get<Eigen::Index>();
  record.fingerprint.config_digest = j.at("config_digest").get<std::string>();
  if (j.contains("meta"))
    record.meta = j.at("meta").get<std::map<std::string, std::string>>();
  return record;
}

Database::Database(std::string config_digest) : config_digest_(std::move(config_digest)) {}

void Database::insert(FingerprintRecord record) {
  if (record.fingerprint.config_digest != config_digest_)
    throw std::invalid_argument("insert: fingerprint config digest " +
                                record.fingerprint.config_digest +
                                " does not match database digest " + config_digest_);
  if (ids_.contains(record.id))
    throw std::invalid_argument("insert: duplicate id '" + record.id + "'");
  const double tag = record.fingerprint.tag;
  ids_.insert(record.id);
  records_.push_back(std::move(record));
  const auto entry = std::make_pair(tag, records_.size() - 1);
  tag_index_.insert(std::upper_bound(tag_index_.begin(), tag_index_.end(), entry), entry);
}

std::vector<std::size_t> Database::preMatch(double query_tag, double a) const {
  if (a < 0.0 || a > 1.0) throw std::invalid_argument("preMatch: a must lie in [0,1]");
  // |tag| in the half-width keeps the interval non-empty for negative tags
  const double half_width = a * std::abs(query_tag);
  const double lo = query_tag - half_width;
  const double hi = query_tag + half_width;
  auto first = std::lower_bound(tag_index_.begin(), tag_index_.end(), lo,
                                [](const auto& e, double v) { return e.first < v; });
  std::vector<std::size_t> out;
  for (; first != tag_index_.end() && first->first <= hi; ++first)
    out.push_back(first->second);
  std::sort(out.begin(), out.end());
  return out;
}

Database Database::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open database " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty database file " + path.string());
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + " line 1: " + e.what());
  }
  if (!header.contains("version") || !header.contains("config_digest"))
    throw std::runtime_error(path.string() + " line 1: missing database header");
  if (header.at("version").get<int>() != 1)
    throw std::runtime_error(path.string() + ": unsupported database version");

  Database db(header.at("config_digest").get<std::string>());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      db.insert(recordFromJsonLine(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  return db;
}

void Database::save(const fs::path& path) const {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << "{\"version\":1,\"config_digest\":" << quoted(config_digest_) << "}\n";
    for (const FingerprintRecord& record : records_) out << recordToJsonLine(record) << "\n";
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

double l2Distance(const Fingerprint& a, const Fingerprint& b) {
  if (a.config_digest != b.config_digest)
    throw std::invalid_argument("l2Distance: fingerprints from different configurations");
  if (a.y.size() != b.y.size())
    throw std::invalid_argument("l2Distance: fingerprint lengths differ");
  return (a.y - b.y).norm();
}

Decision decideCopy(double distance, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("decideCopy: tau must be positive");
  return distance <= tau ? Decision::Copy : Decision::Different;
}

std::vector<SearchHit> search(const Database& db, const Fingerprint& query, double a,
                              double tau, bool exhaustive) {
  if (query.config_digest != db.configDigest())
    throw std::invalid_argument("search: query config digest does not match the database");
  std::vector<std::size_t> candidates;
  if (exhaustive) {
    candidates.resize(db.size());
    for (std::size_t i = 0; i < db.size(); ++i) candidates[i] = i;
  } else {
    candidates = db.preMatch(query.tag, a);
  }
  std::vector<SearchHit> hits;
  hits.reserve(candidates.size());
  for (const std::size_t idx : candidates) {
    const FingerprintRecord& record = db.records()[idx];
    const double distance = l2Distance(query, record.fingerprint);
    hits.push_back({record.id, distance, decideCopy(distance, tau)});
  }
  std::sort(hits.begin(), hits.end(), [](const SearchHit& x, const SearchHit& y) {
    if (x.distance != y.distance) return x.distance < y.distance;
    return x.id < y.id;
  });
  return hits;
}

CalibrationCurve calibrateAdjustmentFactor(const Database& db,
                                           const std::vector<LabeledQuery>& queries,
                                           std::vector<double> a_grid) {
  if (a_grid.empty()) throw std::invalid_argument("calibrate: empty grid");
  std::sort(a_grid.begin(), a_grid.end());
  if (a_grid.front() < 0.0 || a_grid.back() > 1.0)
    throw std::invalid_argument("calibrate: grid values must lie in [0,1]");

  std::size_t positive_pairs = 0;
  for (const LabeledQuery& q : queries) positive_pairs += q.positive_ids.size();
  if (positive_pairs == 0) throw std::invalid_argument("calibrate: no labeled positives");

  std::map<std::string, std::size_t> index_by_id;
  for (std::size_t i = 0; i < db.size(); ++i) index_by_id[db.records()[i].id] = i;

  CalibrationCurve curve;
  for (const double a : a_grid) {
    std::size_t ps_hit = 0, nd_total = 0, nd_excluded = 0;
    for (const LabeledQuery& q : queries) {
      const std::vector<std::size_t> candidates = db.preMatch(q.fingerprint.tag, a);
      const std::set<std::size_t> candidate_set(candidates.begin(), candidates.end());
      std::set<std::size_t> positives;
      for (const std::string& id : q.positive_ids) {
        const auto it = index_by_id.find(id);
        if (it == index_by_id.end())
          throw std::invalid_argument("calibrate: positive id '" + id + "' not in database");
        positives.insert(it->second);
        if (candidate_set.contains(it->second)) ++ps_hit;
      }
      for (std::size_t i = 0; i < db.size(); ++i) {
        if (positives.contains(i)) continue;
        ++nd_total;
        if (!candidate_set.contains(i)) ++nd_excluded;
      }
    }
    CalibrationPoint point;
    point.a = a;
    point.ps = static_cast<double>(ps_hit) / static_cast<double>(positive_pairs);
    point.pnd = nd_total == 0 ? 1.0
                              : static_cast<double>(nd_excluded) / static_cast<double>(nd_total);
    curve.samples.push_back(point);
  }

  const CalibrationPoint* chosen = nullptr;
  for (const CalibrationPoint& p : curve.samples) {
    if (p.ps >= 0.95) {
      chosen = &p;
      break;
    }
  }
  if (chosen == nullptr) {
    // fall back to the ps/pnd crossing
    double best_gap = std::numeric_limits<double>::infinity();
    for (const CalibrationPoint& p : curve.samples) {
      const double gap = std::abs(p.ps - p.pnd);
      if (gap < best_gap) {
        best_gap = gap;
        chosen = &p;
      }
    }
  }
  curve.chosen_a = chosen->a;
  return curve;
}

namespace {

struct GaussianFit {
  double mu = 0.0;
  double sigma = 0.0;
};

GaussianFit fitGaussian(const std::vector<double>& samples, const char* name) {
  if (samples.size() < 2)
    throw std::invalid_argument(std::string("fitThreshold: need >= 2 ") + name + " samples");
  double mu = 0.0;
  for (const double x : samples) mu += x;
  mu /= static_cast<double>(samples.size());
  double var = 0.0;
  for (const double x : samples) var += (x - mu) * (x - mu);
  var /= static_cast<double>(samples.size());
  if (var <= 0.0)
    throw std::invalid_argument(std::string("fitThreshold: zero variance in ") + name);
  return {mu, std::sqrt(var)};
}

}  // namespace

ThresholdModel fitThreshold(const std::vector<double>& v_samples,
                            const std::vector<double>& w_samples) {
  const GaussianFit v = fitGaussian(v_samples, "copy-distance");
  const GaussianFit w = fitGaussian(w_samples, "non-copy-distance");
  if (v.mu >= w.mu)
    throw std::invalid_argument(
        "fitThreshold: copies are not closer than non-copies; the system is unusable");

  // Equal densities give a quadratic in the exponent.
  const double sv2 = v.sigma * v.sigma;
  const double sw2 = w.sigma * w.sigma;
  const double qa = 0.5 / sw2 - 0.5 / sv2;
  const double qb = v.mu / sv2 - w.mu / sw2;
  const double qc = w.mu * w.mu / (2.0 * sw2) - v.mu * v.mu / (2.0 * sv2) -
                    std::log(v.sigma / w.sigma);

  std::vector<double> roots;
  if (std::abs(qa) <= 1e-12 * (0.5 / sw2 + 0.5 / sv2)) {
    roots.push_back(-qc / qb);
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0)
      throw std::invalid_argument("fitThreshold: densities never intersect");
    const double sq = std::sqrt(disc);
    roots.push_back((-qb + sq) / (2.0 * qa));
    roots.push_back((-qb - sq) / (2.0 * qa));
  }

  const double mid = 0.5 * (v.mu + w.mu);
  double tau = std::numeric_limits<double>::quiet_NaN();
  double best = std::numeric_limits<double>::infinity();
  for (const double r : roots) {
    if (r < v.mu || r > w.mu) continue;
    const double gap = std::abs(r - mid);
    if (gap < best) {
      best = gap;
      tau = r;
    }
  }
  if (!std::isfinite(tau))
    throw std::invalid_argument("fitThreshold: no density crossing between the class means");

  ThresholdModel model;
  model.mu_v = v.mu;
  model.sigma_v = v.sigma;
  model.mu_w = w.mu;
  model.sigma_w = w.sigma;
  model.tau = tau;
  return model;
}

void writeCalibrationCsv(const fs::path& path, const CalibrationCurve& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "a,ps,pnd\n";
  for (const CalibrationPoint& p : curve.samples)
    out << g17(p.a) << ',' << g17(p.ps) << ',' << g17(p.pnd) << "\n";
  out << "# chosen_a," << g17(curve.chosen_a) << "\n";
}

void writeThresholdCsv(const fs::path& path, const ThresholdModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "class,mu,sigma,tau\n";
  out << "v," << g17(model.mu_v) << ',' << g17(model.sigma_v) << ',' << g17(model.tau) << "\n";
  out << "w," << g17(model.mu_w) << ',' << g17(model.sigma_w) << ',' << g17(model.tau) << "\n";
}

}  // namespace vidfp
