#pragma once

// Chat sessions for the two A/B arms, persisted to an append-only record log.
//
// Log records (one JSON object per line, in data_dir/records.jsonl):
//   {"type":"session","session_id":..,"arm":..,"requested":..,"created_at":..,"seq":..}
//   {"type":"turn","session_id":..,"turn_index":..,"user_text":..,"final_text":..,"timestamp":..,"decision":{..}}
//   {"type":"survey","session_id":..,"understood":..,"rating":..,"free_text":..,"submitted_at":..,"supersedes":..}

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "bucketbot/evaluation.hpp"
#include "bucketbot/model.hpp"
#include "bucketbot/orchestrator.hpp"
#include "bucketbot/stub_bots.hpp"

namespace bucketbot {

using Json = nlohmann::json;

struct ChatTurn {
  std::uint64_t index = 0;
  std::string user_text;
  std::string final_text;
  std::int64_t timestamp = 0;  // ms since epoch
  Json decision;               // full BucketDecision record
};

struct SurveyRecord {
  std::string session_id;
  bool understood = false;
  int rating = 0;
  std::optional<std::string> free_text;
  std::int64_t submitted_at = 0;
};

struct ChatSession {
  std::string session_id;
  Arm arm = Arm::Susan;
  bool requested = false;  // arm chosen by the caller rather than alternation
  std::int64_t created_at = 0;
  std::uint64_t seq = 0;  // creation order
  std::vector<ChatTurn> turns;
  std::optional<SurveyRecord> survey;
  std::size_t survey_submissions = 0;
};

struct PostResult {
  std::string final_text;
  std::uint64_t turn_index = 0;
  Json decision_summary;
};

struct ExportFilter {
  std::optional<Arm> arm;
  bool with_survey_only = false;
};

// 128 random bits as 32 hex characters.
inline std::string new_session_id() {
  static thread_local std::random_device device;
  std::string id;
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(device()));
    id += buf;
  }
  return id;
}

inline std::int64_t now_millis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// Single-writer append-only JSONL file. Each record goes out in one write().
class RecordLog {
 public:
  explicit RecordLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("cannot open record log '" + path_.string() + "'");
  }
  RecordLog(const RecordLog&) = delete;
  RecordLog& operator=(const RecordLog&) = delete;
  ~RecordLog() {
    if (fd_ >= 0) ::close(fd_);
  }

  const std::filesystem::path& path() const { return path_; }

  void append(const Json& record, bool durable) {
    std::string line = record.dump();
    line += '\n';
    std::lock_guard lock(mutex_);
    std::size_t written = 0;
    while (written < line.size()) {
      const auto n = ::write(fd_, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error("record log write failed");
      }
      written += static_cast<std::size_t>(n);
    }
    if (durable && ::fsync(fd_) != 0) throw Error("record log fsync failed");
  }

  // Complete records in file order. A torn final line (no trailing newline,
  // not valid JSON) from a crash mid-write is cut off.
  static std::vector<Json> replay(const std::filesystem::path& path) {
    std::vector<Json> records;
    if (!std::filesystem::exists(path)) return records;
    const auto content = detail::read_file(path.string());
    std::size_t start = 0, line_no = 0;
    while (start < content.size()) {
      ++line_no;
      const auto end = content.find('\n', start);
      const bool complete = end != std::string::npos;
      const std::string_view line(content.data() + start, (complete ? end : content.size()) - start);
      try {
        if (!detail::trim(line).empty()) records.push_back(Json::parse(line));
      } catch (const Json::parse_error&) {
        if (complete) throw Error("corrupt record log at line " + std::to_string(line_no));
        std::filesystem::resize_file(path, start);
        break;
      }
      if (!complete) {
        // Valid JSON but unterminated: restore the newline so appends stay line-aligned.
        std::FILE* f = std::fopen(path.c_str(), "ab");
        if (f) {
          std::fputc('\n', f);
          std::fclose(f);
        }
        break;
      }
      start = end + 1;
    }
    return records;
  }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  std::mutex mutex_;
};

struct ChatPipeline {
  std::shared_ptr<const Model> model;
  BotEnsemble bots;
  GatingConfig gating;  // sentiment_enabled is overridden per arm
  std::size_t context_turns = 3;
};

class ChatService {
 public:
  using Clock = std::function<std::int64_t()>;

  ChatService(ChatPipeline pipeline, std::filesystem::path data_dir, Clock clock = now_millis)
      : pipeline_(std::move(pipeline)), clock_(std::move(clock)) {
    if (!pipeline_.model) throw ValidationError("chat service needs a model");
    pipeline_.gating.validate();
    susan_config_ = pipeline_.gating;
    susan_config_.sentiment_enabled = false;
    rob_config_ = pipeline_.gating;
    rob_config_.sentiment_enabled = true;
    const auto log_path = data_dir / "records.jsonl";
    restore(RecordLog::replay(log_path));
    log_ = std::make_unique<RecordLog>(log_path);
  }

  static std::string_view display_name(Arm arm) { return to_string(arm); }

  ChatSession create_session(std::optional<Arm> requested = std::nullopt) {
    auto entry = std::make_shared<Entry>();
    auto& s = entry->session;
    s.session_id = new_session_id();
    s.requested = requested.has_value();
    s.created_at = clock_();
    {
      std::unique_lock lock(sessions_mutex_);
      if (requested) {
        s.arm = *requested;
      } else {
        s.arm = unassigned_created_ % 2 == 0 ? Arm::Susan : Arm::Rob;
        ++unassigned_created_;
      }
      s.seq = next_seq_++;
      // Logged under the map lock so log order matches seq order.
      log_->append(session_record(s), false);
      sessions_.emplace(s.session_id, entry);
      order_.push_back(entry);
    }
    return s;
  }

  PostResult post_message(const std::string& session_id, std::string_view user_text) {
    const auto text = detail::trim(user_text);
    if (text.empty()) throw ValidationError("message text is empty");
    auto entry = find(session_id);

    std::lock_guard lock(entry->mutex);
    auto& s = entry->session;
    std::vector<std::string> recent;
    const auto n_ctx = std::min(pipeline_.context_turns, s.turns.size());
    for (auto it = s.turns.end() - static_cast<std::ptrdiff_t>(n_ctx); it != s.turns.end(); ++it)
      recent.push_back(it->user_text);

    const auto candidates = pipeline_.bots.respond_all(text, recent);
    const auto& config = s.arm == Arm::Rob ? rob_config_ : susan_config_;
    const TurnKey key{s.session_id, s.turns.size()};
    const auto decision = gate_and_select(text, candidates, *pipeline_.model, config, key);

    ChatTurn turn;
    turn.index = s.turns.size();
    turn.user_text = std::string(text);
    turn.final_text = render_final(decision);
    turn.timestamp = clock_();
    turn.decision = to_json(decision);
    log_->append(turn_record(s.session_id, turn), false);

    PostResult result;
    result.final_text = turn.final_text;
    result.turn_index = turn.index;
    result.decision_summary = {{"responder", decision.selected().bot_name}};
    s.turns.push_back(std::move(turn));
    return result;
  }

  // Later submissions replace the effective record; the log keeps both.
  bool submit_survey(SurveyRecord record) {
    validate_rating(record.rating);
    auto entry = find(record.session_id);
    std::lock_guard lock(entry->mutex);
    record.submitted_at = clock_();
    const bool supersedes = entry->session.survey.has_value();
    log_->append(survey_record(record, supersedes), true);
    entry->session.survey = std::move(record);
    ++entry->session.survey_submissions;
    return supersedes;
  }

  std::vector<ChatSession> sessions() const {
    std::vector<std::shared_ptr<Entry>> entries;
    {
      std::shared_lock lock(sessions_mutex_);
      entries = order_;
    }
    std::vector<ChatSession> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
      std::lock_guard lock(e->mutex);
      out.push_back(e->session);
    }
    return out;
  }

  std::optional<ChatSession> session(const std::string& id) const {
    std::shared_ptr<Entry> e;
    {
      std::shared_lock lock(sessions_mutex_);
      const auto it = sessions_.find(id);
      if (it == sessions_.end()) return std::nullopt;
      e = it->second;
    }
    std::lock_guard lock(e->mutex);
    return e->session;
  }

  std::size_t session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
  }

  // One joined record per session, in creation order.
  std::vector<Json> export_sessions(const ExportFilter& filter = {}) const {
    std::vector<Json> out;
    for (const auto& s : sessions()) {
      if (filter.arm && s.arm != *filter.arm) continue;
      if (filter.with_survey_only && !s.survey) continue;
      out.push_back(export_record(s));
    }
    return out;
  }

  AbSummary summary() const { return ab_summary(surveys_of(sessions())); }

  const ChatPipeline& pipeline() const { return pipeline_; }
  const GatingConfig& arm_config(Arm arm) const { return arm == Arm::Rob ? rob_config_ : susan_config_; }

  static Json export_record(const ChatSession& s) {
    Json j;
    j["session_id"] = s.session_id;
    j["arm"] = std::string(to_string(s.arm));
    j["created_at"] = s.created_at;
    auto& turns = j["turns"] = Json::array();
    for (const auto& t : s.turns)
      turns.push_back({{"turn_index", t.index},
                       {"user_text", t.user_text},
                       {"final_text", t.final_text},
                       {"timestamp", t.timestamp},
                       {"decision", t.decision}});
    if (s.survey) {
      Json sj{{"understood", s.survey->understood},
              {"rating", s.survey->rating},
              {"submitted_at", s.survey->submitted_at},
              {"submissions", s.survey_submissions}};
      sj["free_text"] = s.survey->free_text ? Json(*s.survey->free_text) : Json();
      j["survey"] = std::move(sj);
    } else {
      j["survey"] = nullptr;
    }
    return j;
  }

  static std::vector<ArmSurvey> surveys_of(const std::vector<ChatSession>& sessions) {
    std::vector<ArmSurvey> out;
    for (const auto& s : sessions)
      if (s.survey) out.push_back({s.arm, s.survey->understood, s.survey->rating});
    return out;
  }

  // Survey rows from exported records, for offline ab_summary.
  static std::vector<ArmSurvey> surveys_from_export(const std::vector<Json>& records) {
    std::vector<ArmSurvey> out;
    for (const auto& r : records) {
      if (!r.contains("survey") || r["survey"].is_null()) continue;
      const auto arm = arm_from_string(r.at("arm").get<std::string>());
      if (!arm) throw Error("unknown arm in export record");
      out.push_back({*arm, r["survey"].at("understood").get<bool>(), r["survey"].at("rating").get<int>()});
    }
    return out;
  }

 private:
  struct Entry {
    mutable std::mutex mutex;
    ChatSession session;
  };

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
    return it->second;
  }

  static Json session_record(const ChatSession& s) {
    return {{"type", "session"},
            {"session_id", s.session_id},
            {"arm", std::string(to_string(s.arm))},
            {"requested", s.requested},
            {"created_at", s.created_at},
            {"seq", s.seq}};
  }

  static Json turn_record(const std::string& session_id, const ChatTurn& t) {
    return {{"type", "turn"},          {"session_id", session_id}, {"turn_index", t.index},
            {"user_text", t.user_text}, {"final_text", t.final_text}, {"timestamp", t.timestamp},
            {"decision", t.decision}};
  }

  static Json survey_record(const SurveyRecord& r, bool supersedes) {
    Json j{{"type", "survey"},
           {"session_id", r.session_id},
           {"understood", r.understood},
           {"rating", r.rating},
           {"submitted_at", r.submitted_at},
           {"supersedes", supersedes}};
    j["free_text"] = r.free_text ? Json(*r.free_text) : Json();
    return j;
  }

  void restore(const std::vector<Json>& records) {
    for (const auto& r : records) {
      const auto type = r.at("type").get<std::string>();
      if (type == "session") {
        auto entry = std::make_shared<Entry>();
        auto& s = entry->session;
        s.session_id = r.at("session_id").get<std::string>();
        const auto arm = arm_from_string(r.at("arm").get<std::string>());
        if (!arm) throw Error("record log: unknown arm");
        s.arm = *arm;
        s.requested = r.at("requested").get<bool>();
        s.created_at = r.at("created_at").get<std::int64_t>();
        s.seq = r.at("seq").get<std::uint64_t>();
        if (!s.requested) ++unassigned_created_;
        next_seq_ = std::max(next_seq_, s.seq + 1);
        sessions_.emplace(s.session_id, entry);
        order_.push_back(entry);
      } else if (type == "turn") {
        auto& s = find(r.at("session_id").get<std::string>())->session;
        ChatTurn t;
        t.index = r.at("turn_index").get<std::uint64_t>();
        if (t.index != s.turns.size()) throw Error("record log: turn out of order for " + s.session_id);
        t.user_text = r.at("user_text").get<std::string>();
        t.final_text = r.at("final_text").get<std::string>();
        t.timestamp = r.at("timestamp").get<std::int64_t>();
        t.decision = r.at("decision");
        s.turns.push_back(std::move(t));
      } else if (type == "survey") {
        auto& s = find(r.at("session_id").get<std::string>())->session;
        SurveyRecord sr;
        sr.session_id = s.session_id;
        sr.understood = r.at("understood").get<bool>();
        sr.rating = r.at("rating").get<int>();
        sr.submitted_at = r.at("submitted_at").get<std::int64_t>();
        if (!r.at("free_text").is_null()) sr.free_text = r["free_text"].get<std::string>();
        s.survey = std::move(sr);
        ++s.survey_submissions;
      } else {
        throw Error("record log: unknown record type '" + type + "'");
      }
    }
    std::sort(order_.begin(), order_.end(),
              [](const auto& a, const auto& b) { return a->session.seq < b->session.seq; });
  }

  ChatPipeline pipeline_;
  GatingConfig susan_config_;
  GatingConfig rob_config_;
  Clock clock_;
  std::unique_ptr<RecordLog> log_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::vector<std::shared_ptr<Entry>> order_;
  std::uint64_t unassigned_created_ = 0;
  std::uint64_t next_seq_ = 0;
};

}  // namespace bucketbot
