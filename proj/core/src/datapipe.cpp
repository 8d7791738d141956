// Copyright 2026 The gbasim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gbasim/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace gbasim {

using json = nlohmann::ordered_json;

std::string_view to_string(Language lang) { return lang == Language::kCN ? "CN" : "EN"; }

Language parse_language(std::string_view text) {
  if (text == "EN" || text == "en") return Language::kEN;
  if (text == "CN" || text == "cn" || text == "ZH" || text == "zh") return Language::kCN;
  throw std::invalid_argument("unknown language tag '" + std::string(text) + "'");
}

std::size_t utf8_length(std::string_view text) {
  std::size_t count = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++count;
  }
  return count;
}

RecordParseError::RecordParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

PairRecord parse_record(std::string_view json_line, std::size_t line_number) {
  json doc;
  try {
    doc = json::parse(json_line);
  } catch (const json::exception& e) {
    throw RecordParseError(line_number, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw RecordParseError(line_number, "record must be a JSON object");

  static constexpr std::array<std::string_view, 8> kKnown = {
      "id", "caption", "caption_length", "aspect_ratio", "sim_score", "lang", "payload", "note"};
  for (const auto& item : doc.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), item.key()) == kKnown.end()) {
      throw RecordParseError(line_number, "unknown field '" + item.key() + "'");
    }
  }

  const auto require = [&](const char* key) -> const json& {
    if (!doc.contains(key)) throw RecordParseError(line_number, std::string("missing field '") + key + "'");
    return doc.at(key);
  };
  const auto number = [&](const char* key) {
    const json& v = require(key);
    if (!v.is_number()) throw RecordParseError(line_number, std::string("field '") + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw RecordParseError(line_number, std::string("field '") + key + "' must be finite");
    return d;
  };

  PairRecord rec;
  const json& id = require("id");
  if (!id.is_string()) throw RecordParseError(line_number, "field 'id' must be a string");
  rec.id = id.get<std::string>();

  if (doc.contains("caption")) {
    if (!doc["caption"].is_string()) throw RecordParseError(line_number, "field 'caption' must be a string");
    rec.caption = doc["caption"].get<std::string>();
  }
  if (doc.contains("caption_length")) {
    const json& len = doc["caption_length"];
    if (!len.is_number_integer() || len.get<std::int64_t>() < 0) {
      throw RecordParseError(line_number, "field 'caption_length' must be a non-negative integer");
    }
    rec.caption_length = len.get<std::size_t>();
  } else if (rec.caption) {
    rec.caption_length = utf8_length(*rec.caption);
  } else {
    throw RecordParseError(line_number, "missing field 'caption_length'");
  }

  rec.aspect_ratio = number("aspect_ratio");
  if (!(rec.aspect_ratio > 0.0)) throw RecordParseError(line_number, "field 'aspect_ratio' must be positive");
  rec.sim_score = number("sim_score");
  if (rec.sim_score < -1.0 || rec.sim_score > 1.0) {
    throw RecordParseError(line_number, "field 'sim_score' must lie in [-1, 1]");
  }

  const json& lang = require("lang");
  if (!lang.is_string()) throw RecordParseError(line_number, "field 'lang' must be a string");
  try {
    rec.lang = parse_language(lang.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw RecordParseError(line_number, e.what());
  }

  if (doc.contains("payload")) {
    if (!doc["payload"].is_string()) throw RecordParseError(line_number, "field 'payload' must be a string");
    rec.payload = doc["payload"].get<std::string>();
  }
  if (doc.contains("note")) {
    if (!doc["note"].is_string()) throw RecordParseError(line_number, "field 'note' must be a string");
    rec.note = doc["note"].get<std::string>();
  }
  return rec;
}

std::string format_record(const PairRecord& record) {
  json doc;
  doc["id"] = record.id;
  if (record.caption) doc["caption"] = *record.caption;
  doc["caption_length"] = record.caption_length;
  doc["aspect_ratio"] = record.aspect_ratio;
  doc["sim_score"] = record.sim_score;
  doc["lang"] = std::string(to_string(record.lang));
  if (!record.payload.empty()) doc["payload"] = record.payload;
  if (!record.note.empty()) doc["note"] = record.note;
  return doc.dump();
}

std::vector<PairRecord> read_records(std::istream& in) {
  std::vector<PairRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    records.push_back(parse_record(line, line_number));
  }
  return records;
}

void write_records(std::ostream& out, const std::vector<PairRecord>& records) {
  for (const PairRecord& r : records) out << format_record(r) << '\n';
}

CleanReport clean(const std::vector<PairRecord>& records, double threshold) {
  CleanReport report;
  for (const PairRecord& rec : records) {
    SourceTally& tally = report.per_source[static_cast<std::size_t>(rec.lang)];
    ++tally.input;
    if (rec.caption_length < kMinCaptionLength) {
      report.dropped.push_back({rec, DropReason::kShortText});
      ++report.dropped_short_text;
      ++tally.dropped_short_text;
    } else if (rec.aspect_ratio > kMaxAspectRatio) {
      report.dropped.push_back({rec, DropReason::kAspectRatio});
      ++report.dropped_aspect;
      ++tally.dropped_aspect;
    } else if (rec.sim_score >= threshold) {
      report.kept.push_back(rec);
      ++tally.kept;
    } else {
      report.rewrite_queue.push_back(rec);
      ++tally.rewrite;
    }
  }
  return report;
}

void write_clean_report_csv(std::ostream& out, const CleanReport& report) {
  out << "source,input,kept,rewrite_queue,dropped_short_text,dropped_aspect\n";
  SourceTally total;
  for (Language lang : {Language::kEN, Language::kCN}) {
    const SourceTally& t = report.per_source[static_cast<std::size_t>(lang)];
    out << to_string(lang) << ',' << t.input << ',' << t.kept << ',' << t.rewrite << ','
        << t.dropped_short_text << ',' << t.dropped_aspect << '\n';
    total.input += t.input;
    total.kept += t.kept;
    total.rewrite += t.rewrite;
    total.dropped_short_text += t.dropped_short_text;
    total.dropped_aspect += t.dropped_aspect;
  }
  out << "total," << total.input << ',' << total.kept << ',' << total.rewrite << ','
      << total.dropped_short_text << ',' << total.dropped_aspect << '\n';
}

RewriteOutcome rewrite_stub(const PairRecord& record, const CaptionRewriter& rewriter) {
  try {
    PairRecord out = record;
    if (std::optional<std::string> caption = rewriter.rewrite(record)) {
      out.caption_length = utf8_length(*caption);
      out.caption = std::move(caption);
    }
    const double score = rewriter.score(out);
    if (!std::isfinite(score) || score < -1.0 || score > 1.0) {
      throw std::out_of_range("rewriter produced score outside [-1, 1]");
    }
    out.sim_score = score;
    out.note.clear();
    return {std::move(out), true};
  } catch (const std::exception& e) {
    PairRecord kept = record;
    kept.note = std::string("rewrite failed: ") + e.what();
    return {std::move(kept), false};
  }
}

PairedRows synth_pairs(const SyntheticTask& task) {
  if (task.n_pairs < 2) throw std::invalid_argument("synth_pairs: n_pairs must be >= 2");
  if (task.d_in == 0) throw std::invalid_argument("synth_pairs: d_in must be >= 1");
  if (!(task.noise_std >= 0.0)) throw std::invalid_argument("synth_pairs: noise_std must be >= 0");
  Rng rng(task.seed);
  Matrix anchors = gaussian(rng, task.n_pairs, task.d_in, 1.0);
  Matrix text = anchors;
  if (task.noise_std > 0.0) text += gaussian(rng, task.n_pairs, task.d_in, task.noise_std);
  return PairedRows{std::move(anchors), std::move(text)};
}

}  // namespace gbasim
