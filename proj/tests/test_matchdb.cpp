#include "vidfp/matchdb.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "test_util.hpp"
#include "vidfp/rng.hpp"

using namespace vidfp;
namespace fs = std::filesystem;

namespace {

Fingerprint makeFingerprint(Rng& rng, double tag, const std::string& digest = "test-digest",
                            int length = 8) {
  Fingerprint fp;
  fp.y.resize(length);
  for (int i = 0; i < length; ++i) fp.y[i] = std::abs(rng.normal());
  fp.tag = tag;
  fp.ranks = {2, 2, 2};
  fp.config_digest = digest;
  return fp;
}

FingerprintRecord makeRecord(Rng& rng, const std::string& id, double tag) {
  return {id, makeFingerprint(rng, tag), {}};
}

fs::path tempFile(const std::string& tag) {
  return fs::temp_directory_path() / ("vidfp_db_" + tag + ".jsonl");
}

}  // namespace

TEST_CASE("an empty database round-trips") {
  const Database db("test-digest");
  const fs::path path = tempFile("empty");
  db.save(path);
  const Database back = Database::load(path);
  CHECK(back.size() == 0);
  CHECK(back.configDigest() == "test-digest");
  fs::remove(path);
}

TEST_CASE("duplicate ids are rejected and leave the database unchanged") {
  Rng rng(1);
  Database db("test-digest");
  db.insert(makeRecord(rng, "a", 1.0));
  CHECK_THROWS_AS(db.insert(makeRecord(rng, "a", 2.0)), std::invalid_argument);
  CHECK(db.size() == 1);
  CHECK(db.records()[0].fingerprint.tag == 1.0);
}

TEST_CASE("fingerprints from another configuration are rejected") {
  Rng rng(2);
  Database db("test-digest");
  FingerprintRecord record{"x", makeFingerprint(rng, 0.5, "other-digest"), {}};
  CHECK_THROWS_AS(db.insert(std::move(record)), std::invalid_argument);
  CHECK(db.size() == 0);
}

TEST_CASE("a hundred records survive save and load float-exactly") {
  Rng rng(3);
  Database db("test-digest");
  for (int i = 0; i < 100; ++i) {
    FingerprintRecord record = makeRecord(rng, "video_" + std::to_string(i), rng.normal() * 10);
    if (i % 3 == 0) record.meta = {{"source", "synthetic"}, {"index", std::to_string(i)}};
    db.insert(std::move(record));
  }
  const fs::path path = tempFile("hundred");
  db.save(path);
  const Database back = Database::load(path);
  REQUIRE(back.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(back.records()[i].id == db.records()[i].id);
    CHECK(back.records()[i].fingerprint.y == db.records()[i].fingerprint.y);
    CHECK(back.records()[i].fingerprint.tag == db.records()[i].fingerprint.tag);
    CHECK(back.records()[i].fingerprint.ranks == db.records()[i].fingerprint.ranks);
    CHECK(back.records()[i].meta == db.records()[i].meta);
  }

  // byte stability: a second save of the loaded database is identical
  const fs::path path2 = tempFile("hundred2");
  back.save(path2);
  std::ifstream a(path), b(path2);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
  CHECK(bytes_a == bytes_b);
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("malformed lines are reported with their line number") {
  const fs::path path = tempFile("malformed");
  {
    std::ofstream out(path);
    out << "{\"version\":1,\"config_digest\":\"test-digest\"}\n";
    out << "{\"id\":\"ok\",\"y\":[1],\"tag\":0,\"ranks\":[1,1,1],\"config_digest\":\"test-digest\"}\n";
    out << "{broken\n";
  }
  try {
    Database::load(path);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("pre-match with a of zero returns exact tag matches only") {
  Rng rng(5);
  Database db("test-digest");
  db.insert(makeRecord(rng, "a", 1.0));
  db.insert(makeRecord(rng, "b", 1.0));
  db.insert(makeRecord(rng, "c", 1.0000001));
  const auto hits = db.preMatch(1.0, 0.0);
  REQUIRE(hits.size() == 2);
  CHECK(db.records()[hits[0]].id == "a");
  CHECK(db.records()[hits[1]].id == "b");
}

TEST_CASE("pre-match interval for tag 10 at a=0.3 is [7, 13] inclusive") {
  Rng rng(7);
  Database db("test-digest");
  const double tags[] = {6.999, 7.0, 9.0, 10.0, 13.0, 13.001};
  for (int i = 0; i < 6; ++i) db.insert(makeRecord(rng, "r" + std::to_string(i), tags[i]));
  const auto hits = db.preMatch(10.0, 0.3);
  std::vector<std::string> ids;
  for (const auto idx : hits) ids.push_back(db.records()[idx].id);
  CHECK(ids == std::vector<std::string>{"r1", "r2", "r3", "r4"});
}

TEST_CASE("negative tags use the absolute half-width") {
  Rng rng(9);
  Database db("test-digest");
  const double tags[] = {-15.5, -15.0, -10.0, -5.0, -4.5};
  for (int i = 0; i < 5; ++i) db.insert(makeRecord(rng, "r" + std::to_string(i), tags[i]));
  const auto hits = db.preMatch(-10.0, 0.5);
  std::vector<std::string> ids;
  for (const auto idx : hits) ids.push_back(db.records()[idx].id);
  CHECK(ids == std::vector<std::string>{"r1", "r2", "r3"});
}

TEST_CASE("candidate sets are monotone in the adjustment factor") {
  Rng rng(11);
  Database db("test-digest");
  for (int i = 0; i < 60; ++i) db.insert(makeRecord(rng, "r" + std::to_string(i), rng.normal() * 8));
  for (int trial = 0; trial < 20; ++trial) {
    const double tag = rng.normal() * 8;
    std::size_t prev = 0;
    for (double a = 0.0; a <= 1.0; a += 0.1) {
      const auto hits = db.preMatch(tag, std::min(a, 1.0));
      CHECK(hits.size() >= prev);
      prev = hits.size();
    }
  }
  CHECK_THROWS_AS(db.preMatch(0.0, 1.5), std::invalid_argument);
}

TEST_CASE("l2 distance behaves like a metric on fingerprints") {
  Rng rng(13);
  const Fingerprint f = makeFingerprint(rng, 1.0);
  CHECK(l2Distance(f, f) == 0.0);

  Fingerprint a = f, b = f;
  a.y.setZero();
  b.y.setZero();
  a.y.resize(2);
  b.y.resize(2);
  a.y << 0.0, 0.0;
  b.y << 3.0, 4.0;
  CHECK(l2Distance(a, b) == doctest::Approx(5.0));

  for (int trial = 0; trial < 10; ++trial) {
    const Fingerprint x = makeFingerprint(rng, 0.0);
    const Fingerprint y = makeFingerprint(rng, 0.0);
    CHECK(l2Distance(x, y) == l2Distance(y, x));
  }

  Fingerprint other_digest = f;
  other_digest.config_digest = "different";
  CHECK_THROWS_AS(l2Distance(f, other_digest), std::invalid_argument);
  Fingerprint other_len = f;
  other_len.y.resize(f.y.size() + 1);
  other_len.y.setZero();
  CHECK_THROWS_AS(l2Distance(f, other_len), std::invalid_argument);
}

TEST_CASE("the copy decision is boundary-inclusive") {
  CHECK(decideCopy(0.0, 0.32) == Decision::Copy);
  CHECK(decideCopy(0.32, 0.32) == Decision::Copy);
  CHECK(decideCopy(0.32 + 1e-12, 0.32) == Decision::Different);
  CHECK_THROWS_AS(decideCopy(0.1, 0.0), std::invalid_argument);
}

TEST_CASE("searching for a stored fingerprint returns it first at distance zero") {
  Rng rng(17);
  Database db("test-digest");
  for (int i = 0; i < 10; ++i) db.insert(makeRecord(rng, "v" + std::to_string(i), double(i)));
  const Fingerprint query = db.records()[3].fingerprint;
  const auto hits = search(db, query, 0.3, 0.5);
  REQUIRE(!hits.empty());
  CHECK(hits[0].id == "v3");
  CHECK(hits[0].distance == 0.0);
  CHECK(hits[0].decision == Decision::Copy);
  for (std::size_t i = 1; i < hits.size(); ++i) CHECK(hits[i].distance >= hits[i - 1].distance);
}

TEST_CASE("searching an empty database yields no results") {
  Rng rng(19);
  const Database db("test-digest");
  CHECK(search(db, makeFingerprint(rng, 0.0), 0.3, 0.5).empty());
}

TEST_CASE("pre-matched results are a subset of exhaustive results") {
  Rng rng(23);
  Database db("test-digest");
  for (int i = 0; i < 40; ++i)
    db.insert(makeRecord(rng, "v" + std::to_string(i), rng.normal() * 5));
  for (int trial = 0; trial < 50; ++trial) {
    const Fingerprint query = makeFingerprint(rng, rng.normal() * 5);
    const auto pre = search(db, query, 0.4, 1.0);
    const auto full = search(db, query, 0.4, 1.0, /*exhaustive=*/true);
    CHECK(full.size() == db.size());
    std::set<std::string> full_ids;
    for (const auto& hit : full) full_ids.insert(hit.id);
    for (const auto& hit : pre) CHECK(full_ids.contains(hit.id));
  }
}

TEST_CASE("calibration on an all-positive-tag corpus reaches ps of one at a of one") {
  Rng rng(29);
  Database db("test-digest");
  std::vector<LabeledQuery> queries;
  for (int i = 0; i < 30; ++i) {
    const double tag = rng.uniform(1.0, 9.0);
    db.insert(makeRecord(rng, "v" + std::to_string(i), tag));
    LabeledQuery q;
    q.fingerprint = makeFingerprint(rng, tag * rng.uniform(0.8, 1.2));
    q.positive_ids = {"v" + std::to_string(i)};
    queries.push_back(std::move(q));
  }
  const CalibrationCurve curve =
      calibrateAdjustmentFactor(db, queries, {0.0, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0});
  CHECK(curve.samples.back().ps == 1.0);
  for (std::size_t i = 1; i < curve.samples.size(); ++i) {
    CHECK(curve.samples[i].ps >= curve.samples[i - 1].ps);
    CHECK(curve.samples[i].pnd <= curve.samples[i - 1].pnd);
  }
}

TEST_CASE("at a of zero every distinct-tag non-duplicate is excluded") {
  Rng rng(31);
  Database db("test-digest");
  for (int i = 0; i < 20; ++i) db.insert(makeRecord(rng, "v" + std::to_string(i), 1.0 + i));
  LabeledQuery q;
  q.fingerprint = db.records()[4].fingerprint;
  q.positive_ids = {"v4"};
  const CalibrationCurve curve = calibrateAdjustmentFactor(db, {q}, {0.0});
  CHECK(curve.samples[0].pnd == 1.0);
  CHECK(curve.samples[0].ps == 1.0);  // exact tag match
}

TEST_CASE("calibration requires labeled positives") {
  Rng rng(37);
  Database db("test-digest");
  db.insert(makeRecord(rng, "a", 1.0));
  LabeledQuery q;
  q.fingerprint = makeFingerprint(rng, 1.0);
  CHECK_THROWS_AS(calibrateAdjustmentFactor(db, {q}, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(calibrateAdjustmentFactor(db, {}, {0.5}), std::invalid_argument);
}

TEST_CASE("equal-variance classes intersect at the midpoint") {
  // two classes with identical spread around 0.2 and 0.6
  std::vector<double> v, w;
  for (int i = -10; i <= 10; ++i) {
    v.push_back(0.2 + 0.004 * i);
    w.push_back(0.6 + 0.004 * i);
  }
  const ThresholdModel model = fitThreshold(v, w);
  CHECK(model.tau == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("fitted threshold lands within 5% of the analytic intersection") {
  Rng rng(41);
  std::vector<double> v, w;
  for (int i = 0; i < 2000; ++i) {
    v.push_back(0.2 + 0.05 * rng.normal());
    w.push_back(0.6 + 0.10 * rng.normal());
  }
  const ThresholdModel model = fitThreshold(v, w);

  // independent oracle: bisection on the true density difference
  const auto density = [](double x, double mu, double sigma) {
    return std::exp(-0.5 * std::pow((x - mu) / sigma, 2)) / sigma;
  };
  double lo = 0.2, hi = 0.6;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double diff = density(mid, 0.2, 0.05) - density(mid, 0.6, 0.10);
    (diff > 0 ? lo : hi) = mid;
  }
  const double analytic = 0.5 * (lo + hi);
  CHECK(std::abs(model.tau - analytic) / analytic < 0.05);
  CHECK(model.mu_v == doctest::Approx(0.2).epsilon(0.02));
  CHECK(model.sigma_w == doctest::Approx(0.10).epsilon(0.05));
}

TEST_CASE("the fitted threshold is scale-equivariant") {
  Rng rng(43);
  std::vector<double> v, w, v3, w3;
  for (int i = 0; i < 500; ++i) {
    v.push_back(0.3 + 0.04 * rng.normal());
    w.push_back(0.9 + 0.12 * rng.normal());
  }
  for (const double x : v) v3.push_back(3.7 * x);
  for (const double x : w) w3.push_back(3.7 * x);
  const ThresholdModel base = fitThreshold(v, w);
  const ThresholdModel scaled = fitThreshold(v3, w3);
  CHECK(scaled.tau == doctest::Approx(3.7 * base.tau).epsilon(1e-9));
}

TEST_CASE("degenerate threshold inputs are rejected") {
  CHECK_THROWS_AS(fitThreshold({0.1}, {0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(fitThreshold({0.1, 0.1}, {0.5, 0.6}), std::invalid_argument);
  // copies farther than non-copies flag an unusable system
  CHECK_THROWS_AS(fitThreshold({0.5, 0.6}, {0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("calibration and threshold CSV files have the documented shape") {
  Rng rng(47);
  Database db("test-digest");
  for (int i = 0; i < 10; ++i) db.insert(makeRecord(rng, "v" + std::to_string(i), double(i)));
  LabeledQuery q;
  q.fingerprint = db.records()[2].fingerprint;
  q.positive_ids = {"v2"};
  const CalibrationCurve curve = calibrateAdjustmentFactor(db, {q}, {0.0, 0.5, 1.0});

  const fs::path cal = tempFile("cal");
  writeCalibrationCsv(cal, curve);
  std::ifstream in(cal);
  std::string line;
  std::getline(in, line);
  CHECK(line == "a,ps,pnd");
  fs::remove(cal);

  ThresholdModel model;
  model.mu_v = 0.2;
  model.sigma_v = 0.05;
  model.mu_w = 0.6;
  model.sigma_w = 0.1;
  model.tau = 0.35;
  const fs::path thr = tempFile("thr");
  writeThresholdCsv(thr, model);
  std::ifstream tin(thr);
  std::getline(tin, line);
  CHECK(line == "class,mu,sigma,tau");
  std::getline(tin, line);
  CHECK(line.substr(0, 2) == "v,");
  fs::remove(thr);
}
