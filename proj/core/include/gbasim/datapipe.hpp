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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gbasim/numerics.hpp"

namespace gbasim {

enum class Language { kEN = 0, kCN = 1 };

std::string_view to_string(Language lang);
Language parse_language(std::string_view text);

/// Metadata of one image-caption pair.
struct PairRecord {
  std::string id;
  std::optional<std::string> caption;
  std::size_t caption_length = 0;  // code points
  double aspect_ratio = 1.0;       // width / height
  double sim_score = 0.0;          // image-text similarity in [-1, 1]
  Language lang = Language::kEN;
  std::string payload;             // opaque reference to the image
  std::string note;                // set when a rewrite failed

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

/// Code points in a UTF-8 string.
std::size_t utf8_length(std::string_view text);

/// Line-delimited JSON record format. Each line is one object:
///   {"id": str, "caption_length": int, "aspect_ratio": num, "sim_score": num,
///    "lang": "EN"|"CN", "caption": str?, "payload": str?, "note": str?}
/// caption_length may be omitted when caption is present; it is then the
/// caption's code-point count.
class RecordParseError : public std::runtime_error {
 public:
  RecordParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

PairRecord parse_record(std::string_view json_line, std::size_t line_number = 0);
std::string format_record(const PairRecord& record);
/// Reads every non-blank line. Throws RecordParseError with a 1-based line.
std::vector<PairRecord> read_records(std::istream& in);
void write_records(std::ostream& out, const std::vector<PairRecord>& records);

enum class DropReason { kShortText, kAspectRatio };

struct DroppedRecord {
  PairRecord record;
  DropReason reason;
};

struct SourceTally {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t rewrite = 0;
  std::size_t dropped_short_text = 0;
  std::size_t dropped_aspect = 0;

  friend bool operator==(const SourceTally&, const SourceTally&) = default;
};

struct CleanReport {
  std::vector<PairRecord> kept;
  std::vector<PairRecord> rewrite_queue;
  std::vector<DroppedRecord> dropped;
  std::size_t dropped_short_text = 0;
  std::size_t dropped_aspect = 0;
  std::array<SourceTally, 2> per_source{};  // indexed by Language

  std::size_t total() const { return kept.size() + rewrite_queue.size() + dropped.size(); }
};

inline constexpr std::size_t kMinCaptionLength = 5;
inline constexpr double kMaxAspectRatio = 3.0;
inline constexpr double kDefaultScoreThreshold = 0.25;

/// Structural drops first: captions shorter than 5 code points, then aspect
/// ratios above 3. Survivors with sim_score >= threshold are kept; the rest
/// go to the rewrite queue. Output preserves input order.
CleanReport clean(const std::vector<PairRecord>& records,
                  double threshold = kDefaultScoreThreshold);

/// CSV with header "source,input,kept,rewrite_queue,dropped_short_text,dropped_aspect"
/// and rows EN, CN, total.
void write_clean_report_csv(std::ostream& out, const CleanReport& report);

/// Pluggable caption transformer for the rewrite queue.
class CaptionRewriter {
 public:
  virtual ~CaptionRewriter() = default;
  /// New caption text; std::nullopt keeps the record's caption (or lack of one).
  virtual std::optional<std::string> rewrite(const PairRecord& record) const = 0;
  /// Similarity of the rewritten record.
  virtual double score(const PairRecord& rewritten) const = 0;
};

/// Leaves captions alone and re-scores to the existing score.
class IdentityRewriter final : public CaptionRewriter {
 public:
  std::optional<std::string> rewrite(const PairRecord&) const override { return std::nullopt; }
  double score(const PairRecord& rewritten) const override { return rewritten.sim_score; }
};

struct RewriteOutcome {
  PairRecord record;
  bool ok = true;
};

/// Applies the rewriter. If it throws, the original record comes back with
/// ok = false and the error in `note`.
RewriteOutcome rewrite_stub(const PairRecord& record, const CaptionRewriter& rewriter);

struct SyntheticTask {
  std::size_t n_pairs = 256;
  std::size_t d_in = 16;
  double noise_std = 0.01;
  std::uint64_t seed = 0;
};

/// Image features are standard normal anchors; text features are the same
/// anchors plus N(0, noise_std^2) noise.
PairedRows synth_pairs(const SyntheticTask& task);

}  // namespace gbasim
