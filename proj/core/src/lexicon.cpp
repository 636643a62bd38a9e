#include "align/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <unordered_map>

#include "align/error.hpp"
#include "align/io.hpp"
#include "align/text.hpp"

namespace align {

Lemmatizer Lemmatizer::identity() { return Lemmatizer{}; }

Lemmatizer Lemmatizer::from_map(std::map<std::string, std::string, std::less<>> table) {
  Lemmatizer l;
  l.mode_ = LemmatizerMode::LookupTable;
  for (auto& [form, lemma] : table) l.table_[text::ascii_lower(form)] = lemma;
  return l;
}

Lemmatizer Lemmatizer::from_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TableLoadError("cannot open lemma table " + path.string());
  std::map<std::string, std::string, std::less<>> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto cells = text::split(line, sep);
    if (cells.size() != 2) {
      throw TableLoadError(path.filename().string() + ":" + std::to_string(line_no) +
                           ": expected two columns (form, lemma)");
    }
    const std::string form = text::ascii_lower(text::trim(cells[0]));
    const std::string lemma = text::ascii_lower(text::trim(cells[1]));
    if (line_no == 1 && form == "form" && lemma == "lemma") continue;
    table[form] = lemma;
  }
  return from_map(std::move(table));
}

Lemmatizer Lemmatizer::from_external(const std::filesystem::path& path) {
  Lemmatizer l;
  l.mode_ = LemmatizerMode::External;
  try {
    read_jsonl(path, [&](const json& j, std::size_t) {
      l.external_[j.at("utterance_id").get<std::string>()] = j.at("lemmas").get<std::vector<std::string>>();
    });
  } catch (const Error& e) {
    throw TableLoadError(std::string("cannot load external lemmas: ") + e.what());
  } catch (const json::exception& e) {
    throw TableLoadError(std::string("cannot load external lemmas: ") + e.what());
  }
  return l;
}

std::string Lemmatizer::lemma(std::string_view form) const {
  if (mode_ == LemmatizerMode::LookupTable) {
    auto it = table_.find(form);
    if (it != table_.end()) return it->second;
  }
  return std::string(form);
}

const std::vector<std::string>* Lemmatizer::external_lemmas(std::string_view utterance_id) const {
  auto it = external_.find(utterance_id);
  return it == external_.end() ? nullptr : &it->second;
}

LemmaMap lemmatize_corpus(const Corpus& corpus, const Lemmatizer& lemmatizer) {
  LemmaMap out;
  for (const auto& u : corpus.utterances()) {
    LemmaCounts& counts = out[u.utterance_id];
    if (lemmatizer.mode() == LemmatizerMode::External) {
      if (const auto* lemmas = lemmatizer.external_lemmas(u.utterance_id)) {
        for (const auto& l : *lemmas) {
          const auto cleaned = text::ascii_lower(text::strip_punctuation(l));
          if (!text::trim(cleaned).empty()) ++counts[std::string(text::trim(cleaned))];
        }
        continue;
      }
    }
    for (const auto& token : text::tokenize(text::ascii_lower(u.text))) {
      ++counts[lemmatizer.lemma(token)];
    }
  }
  return out;
}

std::vector<LemmaRecord> aggregate_lemmas(const LemmaMap& lemmas,
                                          std::span<const AlignmentRecord> records,
                                          int min_utterances) {
  std::unordered_map<std::string_view, double> score_of;
  for (const auto& r : records) score_of.emplace(r.utterance_id, r.max_score);

  struct Acc {
    long long tokens = 0;
    int utterances = 0;
    double score_sum = 0.0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& [utterance_id, counts] : lemmas) {
    auto s = score_of.find(utterance_id);
    for (const auto& [lemma, count] : counts) {
      Acc& a = acc[lemma];
      a.tokens += count;
      if (s != score_of.end()) {
        a.utterances += 1;
        a.score_sum += s->second;
      }
    }
  }
  std::vector<LemmaRecord> out;
  for (const auto& [lemma, a] : acc) {
    if (a.utterances < min_utterances || a.utterances == 0) continue;
    LemmaRecord r;
    r.lemma = lemma;
    r.n_utterances = a.utterances;
    r.mean_clip = a.score_sum / a.utterances;
    r.log_frequency = std::log(static_cast<double>(a.tokens));
    out.push_back(std::move(r));
  }
  return out;
}

std::string_view to_string(NormField field) {
  switch (field) {
    case NormField::Concreteness: return "concreteness";
    case NormField::Imageability: return "imageability";
    case NormField::SensorimotorStrength: return "sensorimotor_strength";
    case NormField::ActionStrength: return "action_strength";
  }
  return "";
}

NormField parse_norm_field(std::string_view name) {
  if (name == "concreteness") return NormField::Concreteness;
  if (name == "imageability") return NormField::Imageability;
  if (name == "sensorimotor_strength" || name == "sensorimotor") return NormField::SensorimotorStrength;
  if (name == "action_strength" || name == "action") return NormField::ActionStrength;
  throw ConfigError("unknown norm field '" + std::string(name) + "'");
}

namespace {

std::optional<double>& field_of(LemmaRecord& r, NormField f) {
  switch (f) {
    case NormField::Concreteness: return r.concreteness;
    case NormField::Imageability: return r.imageability;
    case NormField::SensorimotorStrength: return r.sensorimotor_strength;
    case NormField::ActionStrength: return r.action_strength;
  }
  return r.concreteness;
}

std::string unquote(std::string_view cell) {
  cell = text::trim(cell);
  if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
  return std::string(cell);
}

}  // namespace

MergeReport merge_norms(std::vector<LemmaRecord>& records, std::span<const NormSource> sources) {
  MergeReport report;
  for (const auto& source : sources) {
    std::ifstream in(source.path);
    if (!in) throw CsvFormatError("cannot open norms file " + source.path.string());
    const std::string name = source.path.filename().string();
    std::map<std::string, std::optional<double>> values;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (text::trim(line).empty() || line.front() == '#') continue;
      const auto cells = text::split(line, ',');
      if (cells.size() != 2) {
        throw CsvFormatError(name + ":" + std::to_string(line_no) + ": expected 2 columns, got " +
                             std::to_string(cells.size()));
      }
      if (!header_seen) {
        header_seen = true;
        if (text::ascii_lower(unquote(cells[0])) != "lemma") {
          throw CsvFormatError(name + ": header must start with 'lemma'");
        }
        continue;
      }
      const std::string lemma = text::ascii_lower(unquote(cells[0]));
      const std::string cell = unquote(cells[1]);
      std::optional<double> value;
      if (!cell.empty() && cell != "NA" && cell != "na" && cell != "NaN") {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(cell, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != cell.size() || !std::isfinite(v)) {
          throw CsvFormatError(name + ":" + std::to_string(line_no) + ": non-numeric value '" + cell + "'");
        }
        value = v;
      }
      if (values.contains(lemma)) {
        report.warnings.push_back(name + ":" + std::to_string(line_no) + ": duplicate lemma '" +
                                  lemma + "', last value wins");
      }
      values[lemma] = value;
    }
    if (!header_seen) throw CsvFormatError(name + ": missing header");
    std::size_t matched = 0;
    for (auto& r : records) {
      auto it = values.find(text::ascii_lower(r.lemma));
      if (it != values.end() && it->second) {
        field_of(r, source.field) = it->second;
        ++matched;
      }
    }
    report.matched[std::string(to_string(source.field))] = matched;
  }
  return report;
}

stats::DataTable lemma_table(std::span<const LemmaRecord> records) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto column = [&](auto get) {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(get(r));
    return v;
  };
  auto opt = [nan](const std::optional<double>& o) { return o ? *o : nan; };
  stats::DataTable t;
  t.add_column("mean_clip", column([](const LemmaRecord& r) { return r.mean_clip; }));
  t.add_column("log_frequency", column([](const LemmaRecord& r) { return r.log_frequency; }));
  t.add_column("concreteness", column([&](const LemmaRecord& r) { return opt(r.concreteness); }));
  t.add_column("imageability", column([&](const LemmaRecord& r) { return opt(r.imageability); }));
  t.add_column("sensorimotor_strength",
               column([&](const LemmaRecord& r) { return opt(r.sensorimotor_strength); }));
  t.add_column("action_strength", column([&](const LemmaRecord& r) { return opt(r.action_strength); }));
  return t;
}

namespace {

void standardize_columns(stats::DataTable& t, std::span<const std::string> names) {
  for (const auto& name : names) {
    auto& col = t.columns[t.index_of(name)];
    const double mu = stats::mean(col);
    double ss = 0.0;
    for (double v : col) ss += (v - mu) * (v - mu);
    const double sd = std::sqrt(ss / static_cast<double>(col.size() - 1));
    if (sd == 0.0) continue;  // left for the rank check to report
    for (double& v : col) v = (v - mu) / sd;
  }
}

}  // namespace

LemmaRegression lemma_regression(std::span<const LemmaRecord> records,
                                 const LemmaRegressionOptions& options) {
  if (records.size() < options.min_lemmas) {
    throw TooFewObservations("lemma regression needs at least " +
                                    std::to_string(options.min_lemmas) + " lemmas, got " +
                                    std::to_string(records.size()));
  }
  LemmaRegression out;
  out.n_lemmas = records.size();
  out.standardized = options.standardize;
  auto table = lemma_table(records);
  for (std::size_t c = 0; c < table.names.size(); ++c) {
    out.missing_cells[table.names[c]] = table.missing_count(c);
  }
  // Norms with no observed value at all (no norm file given for them) are
  // left out of the model; partially observed norms are imputed.
  std::vector<std::string> absent;
  stats::DataTable used;
  for (std::size_t c = 0; c < table.names.size(); ++c) {
    if (table.missing_count(c) == table.rows()) {
      absent.push_back(table.names[c]);
      continue;
    }
    used.add_column(table.names[c], table.columns[c]);
    if (table.names[c] != "mean_clip") out.predictors.push_back(table.names[c]);
  }
  table = std::move(used);
  auto completed = stats::impute_pmm(table, options.imputation);
  std::vector<stats::OlsFit> fits;
  for (auto& t : completed) {
    if (options.standardize) standardize_columns(t, out.predictors);
    const auto design = stats::build_design(t, out.predictors);
    Eigen::Map<const Eigen::VectorXd> y(t.column("mean_clip").data(),
                                        static_cast<Eigen::Index>(t.rows()));
    fits.push_back(stats::fit_ols({design, y}));
  }
  out.pooled = stats::pool_rubin(std::span<const stats::OlsFit>(fits));
  out.notes =
      "Lemma frequencies are Zipfian: a few highly frequent lemmas can drive most of the "
      "log-frequency effect. log_frequency is the natural log of raw token counts.";
  if (!absent.empty()) {
    out.notes += " Omitted (no observed values):";
    for (const auto& a : absent) out.notes += " " + a;
    out.notes += ".";
  }
  return out;
}

void write_lemmas_jsonl(std::ostream& out, std::span<const LemmaRecord> records) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const auto& r : records) {
    json j{{"lemma", r.lemma},
           {"n_utterances", r.n_utterances},
           {"mean_clip", r.mean_clip},
           {"log_frequency", r.log_frequency},
           {"concreteness", opt(r.concreteness)},
           {"imageability", opt(r.imageability)},
           {"sensorimotor_strength", opt(r.sensorimotor_strength)},
           {"action_strength", opt(r.action_strength)}};
    out << j.dump() << '\n';
  }
}

}  // namespace align
