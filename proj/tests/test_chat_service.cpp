#include <gtest/gtest.h>

#include <thread>

#include "bucketbot/chat_service.hpp"
#include "support.hpp"

using namespace bucketbot;
using testing_support::fixture_pipeline;
using testing_support::TempDir;

namespace {

std::string dump_all(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) out += r.dump() + "\n";
  return out;
}

bool has_prefix(const std::string& text, const GatingConfig& cfg) {
  for (const auto& p : cfg.all_prefixes())
    if (text.find(p) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(ChatService, AlternatesArms) {
  TempDir dir;
  ChatService svc(fixture_pipeline(), dir.path());
  std::map<Arm, int> n;
  std::set<std::string> ids;
  for (int i = 0; i < 10; ++i) {
    const auto s = svc.create_session();
    ++n[s.arm];
    ids.insert(s.session_id);
    EXPECT_EQ(s.session_id.size(), 32u);
  }
  EXPECT_EQ(n[Arm::Susan], 5);
  EXPECT_EQ(n[Arm::Rob], 5);
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(svc.create_session(Arm::Rob).arm, Arm::Rob);
  EXPECT_EQ(ChatService::display_name(Arm::Rob), "Rob");
}

TEST(ChatService, RobPrefixesSusanDoesNot) {
  TempDir dir;
  ChatService svc(fixture_pipeline(), dir.path());
  const auto rob = svc.create_session(Arm::Rob);
  const auto susan = svc.create_session(Arm::Susan);
  const auto r = svc.post_message(rob.session_id, "i am so sad today");
  const auto& negative = svc.pipeline().gating.prefix_table.at(SentimentLabel::Negative);
  EXPECT_TRUE(std::any_of(negative.begin(), negative.end(), [&](const auto& p) { return r.final_text.starts_with(p); }))
      << r.final_text;
  const auto s = svc.post_message(susan.session_id, "i am so sad today");
  EXPECT_FALSE(has_prefix(s.final_text, svc.pipeline().gating)) << s.final_text;
  EXPECT_EQ(s.turn_index, 0u);
  EXPECT_EQ(svc.post_message(susan.session_id, "hello").turn_index, 1u);
  EXPECT_TRUE(r.decision_summary.contains("responder"));
}

TEST(ChatService, Errors) {
  TempDir dir;
  ChatService svc(fixture_pipeline(), dir.path());
  EXPECT_THROW(svc.post_message("deadbeef", "hi"), NotFoundError);
  const auto s = svc.create_session();
  EXPECT_THROW(svc.post_message(s.session_id, "   "), ValidationError);
  EXPECT_THROW(svc.submit_survey({s.session_id, true, 6}), ValidationError);
  EXPECT_THROW(svc.submit_survey({"nope", true, 3}), NotFoundError);
}

TEST(ChatService, SurveysAndSummary) {
  TempDir dir;
  ChatService svc(fixture_pipeline(), dir.path(), testing_support::counting_clock());
  EXPECT_TRUE(svc.export_sessions().empty());
  EXPECT_THROW(svc.summary(), ValidationError);
  std::vector<std::string> ids;
  for (int i = 0; i < 26; ++i) {
    const auto s = svc.create_session();
    svc.post_message(s.session_id, "hello there");
    EXPECT_FALSE(svc.submit_survey({s.session_id, i % 3 == 0, i % 6}));
    ids.push_back(s.session_id);
  }
  EXPECT_TRUE(svc.submit_survey({ids[0], true, 5, "changed my mind"}));
  const auto exported = svc.export_sessions();
  EXPECT_EQ(exported.size(), 26u);
  EXPECT_EQ(exported[0]["survey"]["rating"], 5);
  EXPECT_EQ(exported[0]["survey"]["submissions"], 2);
  const auto live = svc.summary();
  const auto offline = ab_summary(ChatService::surveys_from_export(exported));
  EXPECT_EQ(to_json(live).dump(), to_json(offline).dump());
  EXPECT_EQ(live.susan.n_users + live.rob.n_users, 26u);

  ExportFilter rob_only;
  rob_only.arm = Arm::Rob;
  for (const auto& r : svc.export_sessions(rob_only)) EXPECT_EQ(r["arm"], "Rob");
  svc.create_session();
  ExportFilter surveyed;
  surveyed.with_survey_only = true;
  EXPECT_EQ(svc.export_sessions(surveyed).size(), 26u);
  EXPECT_EQ(svc.export_sessions().size(), 27u);
}

TEST(ChatService, RestartReproducesExport) {
  TempDir dir;
  std::string before;
  {
    ChatService svc(fixture_pipeline(), dir.path(), testing_support::counting_clock());
    for (int i = 0; i < 6; ++i) {
      const auto s = svc.create_session();
      for (const char* t : {"i am happy", "my dog died", "news about death note"}) svc.post_message(s.session_id, t);
      if (i % 2) svc.submit_survey({s.session_id, true, i % 6, std::nullopt});
    }
    before = dump_all(svc.export_sessions());
  }
  ChatService again(fixture_pipeline(), dir.path(), testing_support::counting_clock());
  EXPECT_EQ(dump_all(again.export_sessions()), before);
  // Alternation continues where it stopped.
  EXPECT_EQ(again.create_session().arm, Arm::Susan);
}

TEST(ChatService, TornFinalRecordIsDropped) {
  TempDir dir;
  std::string before;
  {
    ChatService svc(fixture_pipeline(), dir.path(), testing_support::counting_clock());
    const auto s = svc.create_session();
    svc.post_message(s.session_id, "hello");
    before = dump_all(svc.export_sessions());
  }
  {
    std::FILE* f = std::fopen((dir.path() / "records.jsonl").c_str(), "ab");
    std::fputs("{\"type\":\"turn\",\"session_id\":\"ab", f);
    std::fclose(f);
  }
  ChatService svc(fixture_pipeline(), dir.path(), testing_support::counting_clock());
  EXPECT_EQ(dump_all(svc.export_sessions()), before);
  const auto s = svc.create_session();
  svc.post_message(s.session_id, "still works");
  ChatService third(fixture_pipeline(), dir.path());
  EXPECT_EQ(third.session_count(), 2u);
}

TEST(ChatService, CorruptMiddleRecordIsAnError) {
  TempDir dir;
  detail::write_file((dir.path() / "records.jsonl").string(), "not json\n{}\n");
  EXPECT_THROW(ChatService(fixture_pipeline(), dir.path()), Error);
}

TEST(ChatService, ConcurrentSessionsKeepTurnOrder) {
  TempDir dir;
  ChatService svc(fixture_pipeline(), dir.path());
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(svc.create_session().session_id);
  std::vector<std::thread> workers;
  for (int w = 0; w < 12; ++w)
    workers.emplace_back([&, w] {
      for (int k = 0; k < 15; ++k) svc.post_message(ids[static_cast<std::size_t>(w % 6)], "message " + std::to_string(k));
    });
  for (auto& t : workers) t.join();
  for (const auto& id : ids) {
    const auto s = *svc.session(id);
    ASSERT_EQ(s.turns.size(), 30u);
    for (std::size_t i = 0; i < s.turns.size(); ++i) EXPECT_EQ(s.turns[i].index, i);
  }
  ChatService again(fixture_pipeline(), dir.path());
  EXPECT_EQ(dump_all(again.export_sessions()), dump_all(svc.export_sessions()));
}

TEST(ChatService, SusanReplayOfRobSessionHasNoPrefixes) {
  TempDir dir;
  ChatService svc(fixture_pipeline(), dir.path());
  const auto rob = svc.create_session(Arm::Rob);
  const auto susan = svc.create_session(Arm::Susan);
  bool rob_prefixed = false;
  for (const char* t : {"i am so sad today", "my dog died", "i am happy", "i hate you", "i love this"}) {
    rob_prefixed |= has_prefix(svc.post_message(rob.session_id, t).final_text, svc.pipeline().gating);
  }
  EXPECT_TRUE(rob_prefixed);
  const auto replay = svc.session(rob.session_id);
  for (const auto& turn : replay->turns)
    EXPECT_FALSE(has_prefix(svc.post_message(susan.session_id, turn.user_text).final_text, svc.pipeline().gating));
}
