#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "maploop/scenario.hpp"
#include "maploop/session.hpp"

namespace maploop {

/// On-disk layout of one session under <data_dir>/sessions/<id>/:
///   record.json     scenario document, base directory, config, creation time
///   edits.jsonl     one line per acknowledged submission
///   snapshot.json   summary written every kSnapshotEvery submissions
struct SessionRecord {
    std::string session_id;
    nlohmann::json scenario;
    std::filesystem::path base_dir;
    SessionConfig config;
    std::int64_t created = 0;  // unix seconds
    std::int64_t updated = 0;
};

struct Submission {
    std::uint64_t seq = 0;
    TileIndex tile;
    std::vector<Edit> edits;
    std::string idempotency_key;
    std::int64_t timestamp = 0;
};

nlohmann::json submission_to_json(const Submission& s);
Submission submission_from_json(const nlohmann::json& j);

constexpr std::size_t kSnapshotEvery = 20;

struct SubmitOutcome {
    bool replayed = false;  // idempotent repeat, nothing applied
    double p_k = 0.0;
    bool stopped = false;
    std::size_t tiles_analyzed = 0;
};

/// A session plus its persistence. All access goes through `mutex`.
class LiveSession {
public:
    LiveSession(SessionRecord record, Session session, std::size_t total_errors, std::filesystem::path dir);

    std::mutex mutex;

    const SessionRecord& record() const { return record_; }
    Session& session() { return session_; }
    const Session& session() const { return session_; }
    std::size_t total_errors() const { return total_errors_; }
    std::size_t submissions() const { return submissions_; }
    const std::filesystem::path& dir() const { return dir_; }

    /// Validates, appends to the log with fsync, then publishes the new
    /// state. A key seen before with the same payload is a no-op; with a
    /// different payload it is a ProtocolError.
    SubmitOutcome submit(TileIndex tile, const std::vector<Edit>& edits, const std::string& idempotency_key);

    /// Replays a log entry during recovery.
    void replay(const Submission& s);

    nlohmann::json snapshot() const;
    nlohmann::json status() const;

private:
    void append_line(const std::string& line);

    SessionRecord record_;
    Session session_;
    std::size_t total_errors_ = 0;
    std::filesystem::path dir_;
    std::size_t submissions_ = 0;
    std::map<std::string, std::pair<TileIndex, nlohmann::json>> keys_;  // key -> (tile, edits)
};

class SessionStore {
public:
    /// Creates the directory if needed and recovers every stored session.
    explicit SessionStore(std::filesystem::path data_dir);

    /// Builds the session from a scenario document and persists its record.
    std::shared_ptr<LiveSession> create(const nlohmann::json& scenario, const std::filesystem::path& base_dir,
                                        const nlohmann::json& config_overrides = nlohmann::json::object());

    /// Null when unknown.
    std::shared_ptr<LiveSession> find(const std::string& id) const;
    std::vector<std::string> ids() const;
    const std::filesystem::path& data_dir() const { return data_dir_; }

    /// Rebuilds a session from its directory by replaying the full log and
    /// cross-checking the latest snapshot. Throws IoError on disagreement.
    static std::shared_ptr<LiveSession> recover(const std::filesystem::path& session_dir);

private:
    std::filesystem::path data_dir_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
};

} // namespace maploop
