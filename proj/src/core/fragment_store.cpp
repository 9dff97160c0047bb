#include "sketchfuzz/core/fragment_store.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sketchfuzz/core/text.hpp"

namespace sketchfuzz {

using nlohmann::json;

const std::vector<Fragment>& StoreSnapshot::valid_of(HoleKind kind) const {
  static const std::vector<Fragment> empty;
  auto it = valid.find(kind);
  return it == valid.end() ? empty : it->second;
}

const std::vector<Fragment>&
StoreSnapshot::candidates_of(HoleKind kind) const {
  static const std::vector<Fragment> empty;
  auto it = candidates.find(kind);
  return it == candidates.end() ? empty : it->second;
}

const Feature* StoreSnapshot::feature(FeatureId id) const {
  auto it = features.find(id);
  return it == features.end() ? nullptr : &it->second;
}

bool is_schema_changing_statement(std::string_view text) {
  const std::string head = text::first_token_upper(text);
  return head == "CREATE" || head == "DROP" || head == "ALTER" ||
         head == "RENAME";
}

std::string FragmentStore::dedup_key(HoleKind kind, std::string_view t) {
  return std::string(to_string(kind)) + '\x1f' + text::collapse_whitespace(t);
}

FeatureId FragmentStore::upsert_feature(FeatureLevel level,
                                        std::string_view name) {
  const std::string canonical = text::to_upper(text::trim(name));
  if (canonical.empty())
    throw Error("feature name must be non-empty");
  std::unique_lock lock(mutex_);
  for (const auto& f : features_)
    if (f.level == level && f.name == canonical)
      return f.id;
  Feature f;
  f.id = FeatureId{next_feature_id_++};
  f.name = canonical;
  f.level = level;
  feature_index_[f.id] = features_.size();
  features_.push_back(f);
  touch_feature_locked(f.id);
  return f.id;
}

std::optional<Feature> FragmentStore::feature(FeatureId id) const {
  std::shared_lock lock(mutex_);
  auto it = feature_index_.find(id);
  if (it == feature_index_.end())
    return std::nullopt;
  return features_[it->second];
}

std::optional<Feature> FragmentStore::find_feature(FeatureLevel level,
                                                   std::string_view name) const {
  const std::string canonical = text::to_upper(text::trim(name));
  std::shared_lock lock(mutex_);
  for (const auto& f : features_)
    if (f.level == level && f.name == canonical)
      return f;
  return std::nullopt;
}

std::vector<Feature> FragmentStore::features() const {
  std::shared_lock lock(mutex_);
  return features_;
}

void FragmentStore::set_status(FeatureId id, FeatureStatus status) {
  std::unique_lock lock(mutex_);
  Feature* f = find_feature_locked(id);
  if (!f)
    throw Error("unknown feature id");
  const bool forward = static_cast<int>(status) >= static_cast<int>(f->status);
  const bool abort = f->status == FeatureStatus::Learning &&
                     status == FeatureStatus::Unlearned;
  if (!forward && !abort)
    throw Error("feature status may only move forward: " + f->name);
  if (f->status != status) {
    f->status = status;
    touch_feature_locked(id);
  }
}

void FragmentStore::reset_statuses() {
  std::unique_lock lock(mutex_);
  for (auto& f : features_) {
    if (f.status != FeatureStatus::Unlearned) {
      f.status = FeatureStatus::Unlearned;
      touch_feature_locked(f.id);
    }
  }
}

AddResult FragmentStore::add(Fragment& f) {
  if (text::trim(f.text).empty())
    throw Error("fragment text must be non-empty");
  if (f.hole == HoleKind::WholeStatement &&
      is_schema_changing_statement(f.text))
    return AddResult::Rejected;
  std::unique_lock lock(mutex_);
  const std::string key = dedup_key(f.hole, f.text);
  if (dedup_.contains(key))
    return AddResult::Duplicate;
  dedup_.insert(key);
  f.id = FragmentId{next_fragment_id_++};
  fragment_index_[f.id] = fragments_.size();
  fragments_.push_back(f);
  touch_fragment_locked(f.id);
  return AddResult::Added;
}

std::vector<Fragment> FragmentStore::lookup(HoleKind kind,
                                            bool only_valid) const {
  std::shared_lock lock(mutex_);
  std::vector<Fragment> out;
  for (const auto& f : fragments_)
    if (f.hole == kind && (!only_valid || f.validity == Validity::Valid))
      out.push_back(f);
  return out;
}

std::optional<Fragment> FragmentStore::fragment(FragmentId id) const {
  std::shared_lock lock(mutex_);
  auto it = fragment_index_.find(id);
  if (it == fragment_index_.end())
    return std::nullopt;
  return fragments_[it->second];
}

std::vector<Fragment> FragmentStore::fragments() const {
  std::shared_lock lock(mutex_);
  return fragments_;
}

std::vector<Fragment> FragmentStore::fragments_of(FeatureId feature) const {
  std::shared_lock lock(mutex_);
  std::vector<Fragment> out;
  for (const auto& f : fragments_)
    if (f.feature == feature)
      out.push_back(f);
  return out;
}

std::size_t FragmentStore::size() const {
  std::shared_lock lock(mutex_);
  return fragments_.size();
}

bool FragmentStore::contains_text(HoleKind kind, std::string_view t) const {
  std::shared_lock lock(mutex_);
  return dedup_.contains(dedup_key(kind, t));
}

void FragmentStore::set_validity(FragmentId id, Validity validity) {
  std::unique_lock lock(mutex_);
  Fragment* f = find_fragment_locked(id);
  if (!f)
    throw Error("unknown fragment id");
  if (f->validity != validity) {
    f->validity = validity;
    touch_fragment_locked(id);
  }
}

void FragmentStore::record_use(FragmentId id, bool ok) {
  std::pair<FragmentId, bool> use{id, ok};
  record_uses(std::span(&use, 1));
}

void FragmentStore::record_uses(
    std::span<const std::pair<FragmentId, bool>> uses) {
  if (uses.empty())
    return;
  std::unique_lock lock(mutex_);
  for (const auto& [id, ok] : uses) {
    Fragment* f = find_fragment_locked(id);
    if (!f)
      continue;
    f->stats.record(ok);
    if (Feature* feat = find_feature_locked(f->feature))
      feat->stats.record(ok);
    // Stats alone do not change what generators see; only mark for
    // persistence.
    dirty_fragments_.push_back(id);
  }
}

std::shared_ptr<const StoreSnapshot> FragmentStore::snapshot() const {
  std::shared_lock lock(mutex_);
  std::lock_guard guard(snapshot_mutex_);
  if (snapshot_ && snapshot_->version == version_)
    return snapshot_;
  auto snap = std::make_shared<StoreSnapshot>();
  snap->version = version_;
  for (const auto& f : fragments_)
    if (f.validity == Validity::Valid)
      snap->valid[f.hole].push_back(f);
    else if (f.validity == Validity::Candidate)
      snap->candidates[f.hole].push_back(f);
  for (const auto& f : features_)
    snap->features.emplace(f.id, f);
  snapshot_ = snap;
  return snapshot_;
}

std::string FragmentStore::feature_record_locked(const Feature& f) const {
  json j = {{"kind", "feature"},
            {"id", f.id.value},
            {"level", to_string(f.level)},
            {"name", f.name},
            {"status", to_string(f.status)},
            {"successes", f.stats.successes},
            {"failures", f.stats.failures}};
  return j.dump();
}

std::string FragmentStore::fragment_record_locked(const Fragment& f) const {
  std::string level, name;
  auto it = feature_index_.find(f.feature);
  if (it != feature_index_.end()) {
    level = to_string(features_[it->second].level);
    name = features_[it->second].name;
  } else {
    level = to_string(level_of(f.hole));
  }
  json j = {{"kind", "fragment"},
            {"id", f.id.value},
            {"level", level},
            {"name", name},
            {"hole", to_string(f.hole)},
            {"text", f.text},
            {"validity", to_string(f.validity)},
            {"successes", f.stats.successes},
            {"failures", f.stats.failures},
            {"origin", to_string(f.origin)}};
  return j.dump();
}

std::string FragmentStore::serialize() const {
  std::shared_lock lock(mutex_);
  std::string out;
  for (const auto& f : features_)
    out += feature_record_locked(f) + '\n';
  for (const auto& f : fragments_)
    out += fragment_record_locked(f) + '\n';
  return out;
}

void FragmentStore::load_records(std::string_view lines) {
  for (const auto& raw : text::split_lines(lines)) {
    const std::string line = text::trim(raw);
    if (line.empty())
      continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object())
      throw Error("malformed store record: " + line);
    const std::string kind = j.value("kind", "");
    const auto level = parse_level(j.value("level", ""));
    if (!level)
      throw Error("store record with unknown level: " + line);
    if (kind == "feature") {
      const FeatureId fid = upsert_feature(*level, j.value("name", ""));
      std::unique_lock lock(mutex_);
      Feature* f = find_feature_locked(fid);
      f->status = parse_status(j.value("status", "Unlearned"))
                      .value_or(FeatureStatus::Unlearned);
      f->stats.successes = j.value("successes", std::uint64_t{0});
      f->stats.failures = j.value("failures", std::uint64_t{0});
      ++version_;
    } else if (kind == "fragment") {
      const auto hole = parse_hole(j.value("hole", ""));
      if (!hole)
        throw Error("fragment record with unknown hole: " + line);
      std::string fname = j.value("name", "");
      FeatureId feat{};
      if (!fname.empty())
        feat = upsert_feature(*level, fname);
      const FragmentId id{j.value("id", std::uint64_t{0})};
      std::unique_lock lock(mutex_);
      Fragment* existing = find_fragment_locked(id);
      Fragment rec;
      rec.id = id;
      rec.feature = feat;
      rec.hole = *hole;
      rec.text = j.value("text", "");
      rec.validity = parse_validity(j.value("validity", "Candidate"))
                         .value_or(Validity::Candidate);
      rec.stats.successes = j.value("successes", std::uint64_t{0});
      rec.stats.failures = j.value("failures", std::uint64_t{0});
      rec.origin = parse_origin(j.value("origin", "Synthesized"))
                       .value_or(Origin::Synthesized);
      if (existing) {
        dedup_.erase(dedup_key(existing->hole, existing->text));
        *existing = rec;
        dedup_.insert(dedup_key(rec.hole, rec.text));
      } else {
        const std::string key = dedup_key(rec.hole, rec.text);
        if (dedup_.contains(key))
          continue;
        dedup_.insert(key);
        fragment_index_[id] = fragments_.size();
        fragments_.push_back(rec);
      }
      next_fragment_id_ = std::max(next_fragment_id_, id.value + 1);
      ++version_;
    } else {
      throw Error("store record with unknown kind: " + line);
    }
  }
  std::unique_lock lock(mutex_);
  dirty_features_.clear();
  dirty_fragments_.clear();
}

void FragmentStore::attach_file(const std::filesystem::path& path) {
  const bool existed = std::filesystem::exists(path);
  if (existed) {
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    load_records(buf.str());
  } else if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::unique_lock lock(mutex_);
  file_ = path;
  if (!existed) {
    // Records created before attaching are persisted on the next flush.
    for (const auto& f : features_)
      dirty_features_.push_back(f.id);
    for (const auto& f : fragments_)
      dirty_fragments_.push_back(f.id);
  }
}

void FragmentStore::flush() {
  std::unique_lock lock(mutex_);
  if (!file_ || (dirty_features_.empty() && dirty_fragments_.empty()))
    return;
  std::ofstream out(*file_, std::ios::app);
  if (!out)
    throw Error("cannot append to fragment store file " + file_->string());
  std::unordered_set<std::uint64_t> seen;
  for (FeatureId id : dirty_features_)
    if (seen.insert(id.value).second)
      if (Feature* f = find_feature_locked(id))
        out << feature_record_locked(*f) << '\n';
  seen.clear();
  for (FragmentId id : dirty_fragments_)
    if (seen.insert(id.value).second)
      if (Fragment* f = find_fragment_locked(id))
        out << fragment_record_locked(*f) << '\n';
  dirty_features_.clear();
  dirty_fragments_.clear();
}

void FragmentStore::touch_fragment_locked(FragmentId id) {
  ++version_;
  dirty_fragments_.push_back(id);
}

void FragmentStore::touch_feature_locked(FeatureId id) {
  ++version_;
  dirty_features_.push_back(id);
}

Fragment* FragmentStore::find_fragment_locked(FragmentId id) {
  auto it = fragment_index_.find(id);
  return it == fragment_index_.end() ? nullptr : &fragments_[it->second];
}

Feature* FragmentStore::find_feature_locked(FeatureId id) {
  auto it = feature_index_.find(id);
  return it == feature_index_.end() ? nullptr : &features_[it->second];
}

} // namespace sketchfuzz
