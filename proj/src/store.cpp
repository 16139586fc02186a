#include "maploop/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "maploop/errors.hpp"
#include "maploop/geojson.hpp"

namespace maploop {

namespace {

using nlohmann::json;

std::int64_t unix_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string new_session_id() {
    std::random_device rd;
    const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

json record_to_json(const SessionRecord& r) {
    return {{"session_id", r.session_id},
            {"scenario", r.scenario},
            {"base_dir", r.base_dir.string()},
            {"config", config_to_json(r.config)},
            {"created", r.created}};
}

SessionRecord record_from_json(const json& j) {
    SessionRecord r;
    r.session_id = j.at("session_id").get<std::string>();
    r.scenario = j.at("scenario");
    r.base_dir = j.at("base_dir").get<std::string>();
    r.config = config_from_json(j.at("config"));
    r.created = j.at("created").get<std::int64_t>();
    r.updated = r.created;
    return r;
}

std::shared_ptr<LiveSession> build(SessionRecord record, const std::filesystem::path& dir) {
    Scenario scenario = load_scenario(record.scenario, record.base_dir);
    scenario.config = record.config;
    FootprintSet initial = prepare_annotations(scenario);
    const std::size_t total =
        scenario.truth ? count_errors(initial, *scenario.truth, scenario.raster_width, scenario.raster_height,
                                      scenario.user)
                       : 0;
    Session session = make_session(scenario, std::move(initial));
    return std::make_shared<LiveSession>(std::move(record), std::move(session), total, dir);
}

} // namespace

json submission_to_json(const Submission& s) {
    return {{"seq", s.seq},
            {"tile", {s.tile.row, s.tile.col}},
            {"edits", edits_to_json(s.edits)},
            {"idempotency_key", s.idempotency_key},
            {"ts", s.timestamp}};
}

Submission submission_from_json(const json& j) {
    try {
        Submission s;
        s.seq = j.at("seq").get<std::uint64_t>();
        s.tile = {j.at("tile").at(0).get<int>(), j.at("tile").at(1).get<int>()};
        for (const auto& e : j.at("edits")) {
            s.edits.push_back(edit_from_json(e));
        }
        s.idempotency_key = j.value("idempotency_key", std::string());
        s.timestamp = j.value("ts", std::int64_t{0});
        return s;
    } catch (const json::exception& e) {
        throw ContractError(std::string("malformed submission: ") + e.what());
    }
}

LiveSession::LiveSession(SessionRecord record, Session session, std::size_t total_errors, std::filesystem::path dir)
    : record_(std::move(record)), session_(std::move(session)), total_errors_(total_errors), dir_(std::move(dir)) {}

SubmitOutcome LiveSession::submit(TileIndex tile, const std::vector<Edit>& edits, const std::string& key) {
    const json payload = edits_to_json(edits);
    if (!key.empty()) {
        if (const auto it = keys_.find(key); it != keys_.end()) {
            if (it->second.first != tile || it->second.second != payload) {
                throw ProtocolError("idempotency key reused with a different payload");
            }
            return {true, session_.p_k(), session_.stopped(), session_.tiles_analyzed()};
        }
    }
    Session trial = session_;
    trial.submit_tile(tile, edits);

    Submission s{submissions_ + 1, tile, edits, key, unix_now()};
    append_line(submission_to_json(s).dump());

    session_ = std::move(trial);
    ++submissions_;
    record_.updated = s.timestamp;
    if (!key.empty()) {
        keys_[key] = {tile, payload};
    }
    if (submissions_ % kSnapshotEvery == 0) {
        write_text_file(dir_ / "snapshot.json", snapshot().dump());
    }
    return {false, session_.p_k(), session_.stopped(), session_.tiles_analyzed()};
}

void LiveSession::replay(const Submission& s) {
    require(s.seq == submissions_ + 1, "edit log sequence gap at " + std::to_string(s.seq));
    session_.apply_submission(s.tile, s.edits);
    ++submissions_;
    record_.updated = std::max(record_.updated, s.timestamp);
    if (!s.idempotency_key.empty()) {
        keys_[s.idempotency_key] = {s.tile, edits_to_json(s.edits)};
    }
}

json LiveSession::snapshot() const {
    const SessionState& st = session_.state();
    return {{"submissions", submissions_},
            {"tiles_analyzed", st.analyzed.size()},
            {"p_k", session_.p_k()},
            {"stopped", st.stopped},
            {"generation", st.provider.generation},
            {"errors_found", st.errors_found},
            {"edits", st.edits.size()},
            {"footprints", footprints_to_json(st.current_set)}};
}

json LiveSession::status() const {
    return {{"session_id", record_.session_id},
            {"tiles_analyzed", session_.tiles_analyzed()},
            {"p_k", session_.p_k()},
            {"stopped", session_.stopped()},
            {"generation", session_.state().provider.generation},
            {"pct_tiles_analyzed", session_.fraction_analyzed()},
            {"tiles_total", session_.grid().tile_count()},
            {"errors_found", session_.state().errors_found},
            {"created", record_.created},
            {"updated", record_.updated}};
}

void LiveSession::append_line(const std::string& line) {
    const auto path = dir_ / "edits.jsonl";
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) {
        throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
    }
    const std::string data = line + "\n";
    std::size_t done = 0;
    while (done < data.size()) {
        const auto n = ::write(fd, data.data() + done, data.size() - done);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            const int err = errno;
            ::close(fd);
            throw IoError("write to " + path.string() + " failed: " + std::strerror(err));
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        const int err = errno;
        ::close(fd);
        throw IoError("fsync of " + path.string() + " failed: " + std::strerror(err));
    }
    ::close(fd);
}

SessionStore::SessionStore(std::filesystem::path data_dir) : data_dir_(std::move(data_dir)) {
    std::error_code ec;
    std::filesystem::create_directories(data_dir_ / "sessions", ec);
    if (ec) {
        throw IoError("cannot create data directory " + data_dir_.string() + ": " + ec.message());
    }
    for (const auto& entry : std::filesystem::directory_iterator(data_dir_ / "sessions")) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "record.json")) {
            auto live = recover(entry.path());
            sessions_[live->record().session_id] = std::move(live);
        }
    }
}

std::shared_ptr<LiveSession> SessionStore::create(const json& scenario, const std::filesystem::path& base_dir,
                                                  const json& config_overrides) {
    SessionRecord record;
    record.scenario = scenario;
    record.base_dir = base_dir.empty() ? std::filesystem::path() : std::filesystem::absolute(base_dir);
    Scenario parsed = load_scenario(scenario, record.base_dir);
    record.config = config_from_json(config_overrides, parsed.config);
    record.created = record.updated = unix_now();

    std::lock_guard lock(mutex_);
    do {
        record.session_id = new_session_id();
    } while (sessions_.count(record.session_id) != 0);
    const auto dir = data_dir_ / "sessions" / record.session_id;
    auto live = build(record, dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    write_text_file(dir / "record.json", record_to_json(record).dump(2));
    sessions_[record.session_id] = live;
    return live;
}

std::shared_ptr<LiveSession> SessionStore::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::vector<std::string> SessionStore::ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) {
        out.push_back(id);
    }
    return out;
}

std::shared_ptr<LiveSession> SessionStore::recover(const std::filesystem::path& dir) {
    const json rec = json::parse(read_text_file(dir / "record.json"), nullptr, false);
    if (rec.is_discarded()) {
        throw IoError("corrupt record in " + dir.string());
    }
    SessionRecord record;
    try {
        record = record_from_json(rec);
    } catch (const json::exception& e) {
        throw IoError("corrupt record in " + dir.string() + ": " + e.what());
    }
    auto live = build(std::move(record), dir);

    std::optional<json> snap;
    if (std::filesystem::exists(dir / "snapshot.json")) {
        json s = json::parse(read_text_file(dir / "snapshot.json"), nullptr, false);
        if (!s.is_discarded()) {
            snap = std::move(s);
        }
    }
    const auto log_path = dir / "edits.jsonl";
    if (std::filesystem::exists(log_path)) {
        std::ifstream in(log_path, std::ios::binary);
        if (!in) {
            throw IoError("cannot read " + log_path.string());
        }
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) {
            lines.push_back(line);
        }
        std::uintmax_t valid_bytes = 0;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const json j = json::parse(lines[i], nullptr, false);
            if (j.is_discarded()) {
                if (i + 1 == lines.size()) {
                    // Torn final write: it was never acknowledged.
                    std::filesystem::resize_file(log_path, valid_bytes);
                    break;
                }
                throw IoError("corrupt line " + std::to_string(i + 1) + " in " + log_path.string());
            }
            live->replay(submission_from_json(j));
            valid_bytes += lines[i].size() + 1;
            if (snap && snap->value("submissions", std::size_t{0}) == live->submissions() &&
                live->snapshot() != *snap) {
                throw IoError("snapshot disagrees with the edit log in " + dir.string());
            }
        }
    }
    if (snap && snap->value("submissions", std::size_t{0}) > live->submissions()) {
        throw IoError("snapshot is ahead of the edit log in " + dir.string());
    }
    return live;
}

} // namespace maploop
