#include "fldt/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fldt/errors.hpp"
#include "fldt/numeric.hpp"
#include "fldt/simlab.hpp"

namespace fs = std::filesystem;

namespace fldt {

namespace {

constexpr std::uint64_t kSplitStreamTag = 0x73706c6974ULL;   // "split"
constexpr std::uint64_t kCurveStreamTag = 0x6375727665ULL;   // "curve"

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& token, const std::string& where) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(where + ": invalid numeric value '" + token + "'");
  }
  return value;
}

SessionDataset load_session_csv(const fs::path& file,
                                const std::string& session_id) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": cannot open");

  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(file.string() + ":1: missing header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  if (header.size() < 2 || header.front() != "label") {
    throw ParseError(file.string() + ":1: expected header label,f1,...,fd");
  }
  const int d = static_cast<int>(header.size()) - 1;

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = file.string() + ":" + std::to_string(line_no);
    const auto fields = split_line(line);
    if (static_cast<int>(fields.size()) != d + 1) {
      throw ParseError(where + ": expected " + std::to_string(d + 1) +
                       " fields, got " + std::to_string(fields.size()));
    }
    const double label = parse_double(fields[0], where);
    if (label != 0.0 && label != 1.0) {
      throw ParseError(where + ": label must be 0 or 1");
    }
    std::vector<double> row(d);
    for (int c = 0; c < d; ++c) row[c] = parse_double(fields[c + 1], where);
    rows.push_back(std::move(row));
    labels.push_back(static_cast<int>(label));
  }

  SessionDataset ds;
  ds.session_id = session_id;
  ds.labels = std::move(labels);
  ds.features.resize(static_cast<int>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < d; ++c) ds.features(static_cast<int>(r), c) = rows[r][c];
  }
  ds.validate();
  return ds;
}

}  // namespace

void SessionDataset::validate() const {
  if (features.rows() != static_cast<int>(labels.size())) {
    throw InvariantViolationError(session_id +
                                  ": label count does not match row count");
  }
  if (size() < 4) {
    throw InvariantViolationError(session_id + ": needs at least 4 windows");
  }
  int n1 = 0;
  for (int label : labels) {
    if (label != 0 && label != 1) {
      throw InvariantViolationError(session_id + ": labels must be 0 or 1");
    }
    n1 += label;
  }
  if (n1 < 2 || size() - n1 < 2) {
    throw InvariantViolationError(session_id +
                                  ": needs at least 2 windows per class");
  }
  if (!features.allFinite()) {
    throw InvariantViolationError(session_id + ": non-finite feature value");
  }
}

std::vector<SessionDataset> load_sessions(const fs::path& path) {
  std::vector<SessionDataset> sessions;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      sessions.push_back(load_session_csv(file, file.stem().string()));
    }
    return sessions;
  }

  if (!fs::exists(path)) {
    throw ParseError(path.string() + ": no such file or directory");
  }
  // Single manifest JSON.
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("sessions") ||
      !manifest["sessions"].is_array()) {
    throw ParseError(path.string() + ": manifest needs a 'sessions' array");
  }
  for (const auto& entry : manifest["sessions"]) {
    if (!entry.is_object() || !entry.contains("session_id") ||
        !entry.contains("csv")) {
      throw ParseError(path.string() +
                       ": manifest entries need session_id and csv");
    }
    fs::path csv = entry["csv"].get<std::string>();
    if (csv.is_relative()) csv = path.parent_path() / csv;
    sessions.push_back(
        load_session_csv(csv, entry["session_id"].get<std::string>()));
  }
  return sessions;
}

void save_sessions(std::span<const SessionDataset> sessions,
                   const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& ds : sessions) {
    ds.validate();
    std::ofstream out(dir / (ds.session_id + ".csv"));
    if (!out) {
      throw ParseError((dir / (ds.session_id + ".csv")).string() +
                       ": cannot write");
    }
    out << "label";
    for (int c = 0; c < ds.dim(); ++c) out << ",f" << (c + 1);
    out << "\n";
    for (int r = 0; r < ds.size(); ++r) {
      out << ds.labels[static_cast<std::size_t>(r)];
      for (int c = 0; c < ds.dim(); ++c) {
        out << "," << format_g17(ds.features(r, c));
      }
      out << "\n";
    }
  }
}

std::vector<Eigen::VectorXd> load_source_vectors(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": cannot open");
  std::vector<Eigen::VectorXd> vectors;
  std::string line;
  int line_no = 0;
  int d = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = file.string() + ":" + std::to_string(line_no);
    const auto fields = split_line(line);
    if (d < 0) d = static_cast<int>(fields.size());
    if (static_cast<int>(fields.size()) != d) {
      throw ParseError(where + ": inconsistent column count");
    }
    Eigen::VectorXd v(d);
    for (int c = 0; c < d; ++c) v[c] = parse_double(fields[c], where);
    if (std::abs(v.norm() - 1.0) > 1e-6) {
      throw InvariantViolationError(where + ": source vector not unit norm");
    }
    vectors.push_back(std::move(v));
  }
  return vectors;
}

void save_source_vectors(std::span<const Eigen::VectorXd> vectors,
                         const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw ParseError(file.string() + ": cannot write");
  for (const auto& v : vectors) {
    for (int c = 0; c < v.size(); ++c) {
      if (c) out << ",";
      out << format_g17(v[c]);
    }
    out << "\n";
  }
}

SourceSummary load_source_aggregate(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
  for (const char* key :
       {"d", "j_count", "mu_hat", "psi_scale", "resultant_length"}) {
    if (!j.contains(key)) {
      throw ParseError(file.string() + ": missing key '" + key + "'");
    }
  }
  const int d = j["d"].get<int>();
  SourceSummary s;
  s.j_count = j["j_count"].get<int>();
  s.psi_scale = j["psi_scale"].get<double>();
  s.resultant_length = j["resultant_length"].get<double>();
  const auto& mu = j["mu_hat"];
  if (!mu.is_array() || static_cast<int>(mu.size()) != d) {
    throw ParseError(file.string() + ": mu_hat must hold d entries");
  }
  s.mu_hat.resize(d);
  for (int i = 0; i < d; ++i) s.mu_hat[i] = mu[static_cast<std::size_t>(i)].get<double>();

  if (d < 1 || s.j_count < 1 || !(s.psi_scale >= 0.0) ||
      !(s.resultant_length > 0.0 && s.resultant_length <= 1.0 + 1e-9) ||
      std::abs(s.mu_hat.norm() - 1.0) > 1e-6) {
    throw InvariantViolationError(file.string() + ": invalid source aggregate");
  }
  return s;
}

void save_source_aggregate(const SourceSummary& summary, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw ParseError(file.string() + ": cannot write");
  out << "{\n";
  out << "  \"d\": " << summary.dim() << ",\n";
  out << "  \"j_count\": " << summary.j_count << ",\n";
  out << "  \"mu_hat\": [";
  for (int i = 0; i < summary.dim(); ++i) {
    if (i) out << ", ";
    out << format_g17(summary.mu_hat[i]);
  }
  out << "],\n";
  out << "  \"psi_scale\": " << format_g17(summary.psi_scale) << ",\n";
  out << "  \"resultant_length\": " << format_g17(summary.resultant_length)
      << "\n";
  out << "}\n";
}

SplitIndices consecutive_split(const SessionDataset& ds, const SplitSpec& spec,
                               int split_index) {
  ds.validate();
  if (!(spec.proportion > 0.0 && spec.proportion < 1.0)) {
    throw InvariantViolationError(
        "consecutive_split: proportion must lie in (0, 1)");
  }
  if (split_index < 0) {
    throw InvariantViolationError("consecutive_split: negative split index");
  }

  std::array<std::vector<int>, 2> by_class;
  for (int r = 0; r < ds.size(); ++r) {
    by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(r)])]
        .push_back(r);
  }

  RngStream rng = RngStream(spec.seed, kSplitStreamTag)
                      .substream(static_cast<std::uint64_t>(split_index));
  SplitIndices out;
  std::vector<char> in_train(static_cast<std::size_t>(ds.size()), 0);
  for (int c = 0; c < 2; ++c) {
    const auto& idx = by_class[static_cast<std::size_t>(c)];
    const int n_c = static_cast<int>(idx.size());
    const int m_c = static_cast<int>(
        std::floor(spec.proportion * static_cast<double>(n_c)));
    if (m_c < 2) {
      throw TooFewWindowsError("consecutive_split: class " +
                               std::to_string(c) + " train block has " +
                               std::to_string(m_c) + " windows (< 2)");
    }
    const int start = static_cast<int>(
        rng.uniform_below(static_cast<std::uint64_t>(n_c - m_c + 1)));
    for (int i = start; i < start + m_c; ++i) {
      in_train[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
    }
  }
  for (int r = 0; r < ds.size(); ++r) {
    (in_train[static_cast<std::size_t>(r)] ? out.train : out.test).push_back(r);
  }
  return out;
}

namespace {

std::vector<LabeledSample> gather(const SessionDataset& ds,
                                  std::span<const int> rows) {
  std::vector<LabeledSample> out;
  out.reserve(rows.size());
  for (int r : rows) {
    out.push_back({ds.features.row(r).transpose(),
                   ds.labels[static_cast<std::size_t>(r)]});
  }
  return out;
}

void check_split_evaluable(std::span<const LabeledSample> test) {
  int n1 = 0;
  for (const auto& s : test) n1 += s.y;
  if (test.empty() || n1 == 0 || n1 == static_cast<int>(test.size())) {
    throw TooFewWindowsError("evaluate_transfer: test block lacks a class");
  }
}

double score(const Eigen::VectorXd& w, std::span<const LabeledSample> test) {
  std::vector<int> preds(test.size()), truth(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    preds[i] = predict_raw(w, test[i].x);
    truth[i] = test[i].y;
  }
  return balanced_accuracy(preds, truth);
}

}  // namespace

SessionEvalResult evaluate_transfer(const SessionDataset& target,
                                    const SourceSummary& sources,
                                    const SplitSpec& spec,
                                    const AlphaGrid& grid, int b_samples) {
  target.validate();
  if (target.dim() != sources.dim()) {
    throw DimensionMismatchError(
        "evaluate_transfer: session dimension does not match source vectors");
  }
  SessionEvalResult result;
  result.session_id = target.session_id;
  result.p = spec.proportion;

  const RngStream session_base(spec.seed,
                               kCurveStreamTag ^ fnv1a(target.session_id));
  for (int split = 0; split < spec.split_count; ++split) {
    try {
      const SplitIndices idx = consecutive_split(target, spec, split);
      const auto train = gather(target, idx.train);
      const auto test = gather(target, idx.test);
      check_split_evaluable(test);

      const AssumptionTransform tf = fit_assumption_transform(train);
      const auto train_t = tf.apply(train);
      const auto test_t = tf.apply(test);
      const FldFit fit = fit_fld(train_t);

      const RiskCurve curve =
          optimal_alpha(fit, sources, grid, b_samples,
                        session_base.substream(static_cast<std::uint64_t>(split)));
      const auto [alpha_oracle, oracle_acc] =
          oracle_alpha(fit.omega.vec(), sources.mu_hat, grid, test_t);

      const Eigen::VectorXd w_opt =
          combine(curve.alpha_star, fit.omega.vec(), sources.mu_hat);

      auto push = [&](Classifier c, double acc, double alpha, bool has_alpha) {
        result.records.push_back({target.session_id, spec.proportion, split, c,
                                  acc, alpha, has_alpha});
      };
      push(Classifier::Target, score(fit.omega.vec(), test_t), 1.0, false);
      push(Classifier::Source, score(sources.mu_hat, test_t), 0.0, false);
      push(Classifier::Optimal, score(w_opt, test_t), curve.alpha_star, true);
      push(Classifier::Oracle, oracle_acc, alpha_oracle, true);
    } catch (const Error& e) {
      result.skipped.push_back({split, e.what()});
    }
  }
  return result;
}

SessionEvalResult evaluate_transfer(const SessionDataset& target,
                                    std::span<const Eigen::VectorXd> sources,
                                    const SplitSpec& spec,
                                    const AlphaGrid& grid, int b_samples) {
  return evaluate_transfer(target, summarize_sources(sources), spec, grid,
                           b_samples);
}

double signed_rank_test(std::span<const double> differences) {
  std::vector<double> abs_values;
  std::vector<int> signs;
  for (double v : differences) {
    if (v == 0.0) continue;  // zeros carry no evidence either way
    abs_values.push_back(std::abs(v));
    signs.push_back(v > 0.0 ? 1 : 0);
  }
  const int n = static_cast<int>(abs_values.size());
  if (n < 5) {
    throw TooFewPairsError("signed_rank_test: needs >= 5 nonzero differences");
  }

  // Mid-ranks of |d|, doubled so that tied ranks stay integral.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return abs_values[static_cast<std::size_t>(a)] <
           abs_values[static_cast<std::size_t>(b)];
  });
  std::vector<long> rank2(static_cast<std::size_t>(n));
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n &&
           abs_values[static_cast<std::size_t>(order[static_cast<std::size_t>(j + 1)])] ==
               abs_values[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]) {
      ++j;
    }
    const long two_rank = (i + 1) + (j + 1);  // 2 * average rank
    for (int k = i; k <= j; ++k) {
      rank2[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] =
          two_rank;
    }
    i = j + 1;
  }

  long two_w = 0;
  long total2 = 0;
  double sum_rank_sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double r = static_cast<double>(rank2[static_cast<std::size_t>(k)]) / 2.0;
    sum_rank_sq += r * r;
    total2 += rank2[static_cast<std::size_t>(k)];
    if (signs[static_cast<std::size_t>(k)]) two_w += rank2[static_cast<std::size_t>(k)];
  }

  if (n <= 20) {
    // Exact null: distribution of the doubled statistic by subset-sum DP.
    std::vector<double> dp(static_cast<std::size_t>(total2) + 1, 0.0);
    dp[0] = 1.0;
    long reach = 0;
    for (int k = 0; k < n; ++k) {
      const long r2 = rank2[static_cast<std::size_t>(k)];
      for (long s = reach; s >= 0; --s) {
        if (dp[static_cast<std::size_t>(s)] != 0.0) {
          dp[static_cast<std::size_t>(s + r2)] += dp[static_cast<std::size_t>(s)];
        }
      }
      reach += r2;
    }
    double count = 0.0;
    for (long s = two_w; s <= total2; ++s) {
      count += dp[static_cast<std::size_t>(s)];
    }
    return count / std::pow(2.0, n);
  }

  const double w_plus = static_cast<double>(two_w) / 2.0;
  const double mean = static_cast<double>(n) * (n + 1) / 4.0;
  const double sd = std::sqrt(sum_rank_sq / 4.0);
  return 1.0 - normal_cdf((w_plus - mean - 0.5) / sd);
}

}  // namespace fldt
