#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sketchfuzz/core/types.hpp"

namespace sketchfuzz {

enum class AddResult { Added, Duplicate, Rejected };

// Immutable view of the store used by generators. Valid and not yet
// validated fragments, grouped by hole kind in insertion order.
struct StoreSnapshot {
  std::uint64_t version = 0;
  std::map<HoleKind, std::vector<Fragment>> valid;
  std::map<HoleKind, std::vector<Fragment>> candidates;
  std::unordered_map<FeatureId, Feature> features;

  const std::vector<Fragment>& valid_of(HoleKind kind) const;
  const std::vector<Fragment>& candidates_of(HoleKind kind) const;
  const Feature* feature(FeatureId id) const;
};

// Shared fragment and feature collection.
//
// Reads may run concurrently; every mutation takes the writer lock. When a
// backing file is attached, mutations are remembered and flush() appends one
// JSON record per changed feature or fragment.
class FragmentStore {
public:
  FragmentStore() = default;
  FragmentStore(const FragmentStore&) = delete;
  FragmentStore& operator=(const FragmentStore&) = delete;

  // Returns the feature with identity (level, upper(name)), creating an
  // Unlearned one when absent.
  FeatureId upsert_feature(FeatureLevel level, std::string_view name);
  std::optional<Feature> feature(FeatureId id) const;
  std::optional<Feature> find_feature(FeatureLevel level,
                                      std::string_view name) const;
  std::vector<Feature> features() const;
  // Status changes must move forward (Unlearned->Learning->Learned); the
  // only backwards moves are Learning->Unlearned (aborted learning) and
  // reset_statuses().
  void set_status(FeatureId id, FeatureStatus status);
  void reset_statuses();

  // Inserts f unless a fragment with the same hole and whitespace-collapsed
  // text exists. Statement fragments whose first token creates or drops
  // schema objects are Rejected. On Added, f.id is assigned.
  AddResult add(Fragment& f);
  std::vector<Fragment> lookup(HoleKind kind, bool only_valid) const;
  std::optional<Fragment> fragment(FragmentId id) const;
  std::vector<Fragment> fragments() const;
  std::vector<Fragment> fragments_of(FeatureId feature) const;
  std::size_t size() const;
  bool contains_text(HoleKind kind, std::string_view text) const;

  void set_validity(FragmentId id, Validity validity);
  void record_use(FragmentId id, bool ok);
  void record_uses(std::span<const std::pair<FragmentId, bool>> uses);
  // Applies f to every fragment under the writer lock.
  template <typename F>
  void for_each_mutable(F&& f) {
    std::unique_lock lock(mutex_);
    for (auto& frag : fragments_) {
      Fragment before = frag;
      f(frag);
      if (!(before == frag))
        touch_fragment_locked(frag.id);
    }
  }

  std::shared_ptr<const StoreSnapshot> snapshot() const;

  // Line-delimited JSON encoding of the whole store (one record per
  // feature, then per fragment).
  std::string serialize() const;
  // Replays records in order; later records for the same id override.
  void load_records(std::string_view lines);

  // Loads `path` if it exists and appends future changes to it.
  void attach_file(const std::filesystem::path& path);
  void flush();

private:
  static std::string dedup_key(HoleKind kind, std::string_view text);
  void touch_fragment_locked(FragmentId id);
  void touch_feature_locked(FeatureId id);
  Fragment* find_fragment_locked(FragmentId id);
  Feature* find_feature_locked(FeatureId id);
  std::string feature_record_locked(const Feature& f) const;
  std::string fragment_record_locked(const Fragment& f) const;

  mutable std::shared_mutex mutex_;
  std::vector<Feature> features_;
  std::vector<Fragment> fragments_;
  std::unordered_map<FeatureId, std::size_t> feature_index_;
  std::unordered_map<FragmentId, std::size_t> fragment_index_;
  std::unordered_set<std::string> dedup_;
  std::uint64_t next_feature_id_ = 1;
  std::uint64_t next_fragment_id_ = 1;
  std::uint64_t version_ = 0;

  std::optional<std::filesystem::path> file_;
  std::vector<FeatureId> dirty_features_;
  std::vector<FragmentId> dirty_fragments_;

  mutable std::mutex snapshot_mutex_;
  mutable std::shared_ptr<const StoreSnapshot> snapshot_;
};

// True when a statement fragment would create, drop, alter or rename schema
// objects that the schema model cannot follow.
bool is_schema_changing_statement(std::string_view text);

} // namespace sketchfuzz
