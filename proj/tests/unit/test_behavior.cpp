#include <gtest/gtest.h>

#include "egocomm/behavior.hpp"
#include "helpers.hpp"

using namespace egocomm;

namespace {

Recording with_fg(std::string id, std::int64_t minute, std::size_t fg, std::size_t total = 2000) {
  Recording r;
  r.recording_id = std::move(id);
  r.minute_index = minute;
  r.frames.resize(total);
  std::vector<FrameClass> labels(total, FrameClass::S);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(fg), FrameClass::FG);
  r.labels = labels;
  return r;
}

std::vector<std::int64_t> flatten(const std::vector<Session>& ss) {
  std::vector<std::int64_t> out;
  for (const auto& s : ss) out.insert(out.end(), s.minute_indices.begin(), s.minute_indices.end());
  return out;
}

}  // namespace

TEST(Qualify, ThresholdIsInclusive) {
  Shift s;
  s.duration_hours = 1.0;
  s.recordings = {with_fg("a", 0, 199), with_fg("b", 1, 200), with_fg("c", 2, 2000)};
  EXPECT_EQ(qualify_recordings(s, {}), (std::vector<std::int64_t>{1, 2}));
}

TEST(Qualify, CountsExample) {
  Shift s;
  s.duration_hours = 1.0;
  s.recordings = {with_fg("a", 0, 150), with_fg("b", 5, 200), with_fg("c", 9, 850)};
  EXPECT_EQ(qualify_recordings(s, {}).size(), 2u);
}

TEST(Qualify, ExternalLabelsTakePrecedenceAndMissingLabelsFail) {
  Shift s;
  s.duration_hours = 1.0;
  s.recordings = {with_fg("a", 0, 500)};
  LabelMap labels{{"a", std::vector<FrameClass>(2000, FrameClass::BG)}};
  EXPECT_TRUE(qualify_recordings(s, labels).empty());
  s.recordings[0].labels.reset();
  EXPECT_THROW(qualify_recordings(s, {}), Error);
}

TEST(Segment, FigureThreeExample) {
  const std::vector<std::int64_t> t{0, 1, 4};
  const auto ss = segment_sessions(t);
  ASSERT_EQ(ss.size(), 2u);
  EXPECT_EQ(ss[0].minute_indices, (std::vector<std::int64_t>{0, 1}));
  EXPECT_EQ(ss[1].minute_indices, (std::vector<std::int64_t>{4}));
}

TEST(Segment, RunLengthExampleAndEmpty) {
  const std::vector<std::int64_t> t{2, 3, 4, 7, 9, 10};
  const auto ss = segment_sessions(t);
  ASSERT_EQ(ss.size(), 3u);
  EXPECT_EQ(ss[0].minute_indices, (std::vector<std::int64_t>{2, 3, 4}));
  EXPECT_EQ(ss[1].minute_indices, (std::vector<std::int64_t>{7}));
  EXPECT_EQ(ss[2].minute_indices, (std::vector<std::int64_t>{9, 10}));
  EXPECT_TRUE(segment_sessions({}).empty());
}

TEST(Segment, UnsortedRejected) {
  const std::vector<std::int64_t> t{3, 1};
  EXPECT_THROW(segment_sessions(t), Error);
  const std::vector<std::int64_t> dup{1, 1};
  EXPECT_THROW(segment_sessions(dup), Error);
}

TEST(Segment, Properties) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int64_t> t;
    for (std::int64_t m = 0; m < 200; ++m)
      if (std::bernoulli_distribution(0.4)(rng)) t.push_back(m);
    const auto ss = segment_sessions(t);
    EXPECT_EQ(flatten(ss), t);
    std::size_t adjacent = 0;
    for (std::size_t i = 1; i < t.size(); ++i) adjacent += t[i] == t[i - 1] + 1;
    EXPECT_EQ(ss.size(), t.size() - adjacent);
    for (std::size_t k = 1; k < ss.size(); ++k)
      EXPECT_GT(ss[k].first_minute(), ss[k - 1].minute_indices.back() + 1);
    EXPECT_EQ(segment_sessions(flatten(ss)), ss);
  }
}

TEST(Segment, RaisingThresholdNeverAddsCoverage) {
  std::mt19937_64 rng(9);
  Shift s;
  s.duration_hours = 2.0;
  for (std::int64_t m = 0; m < 120; ++m)
    if (std::bernoulli_distribution(0.6)(rng))
      s.recordings.push_back(with_fg("r" + std::to_string(m), m, std::uniform_int_distribution<std::size_t>(0, 600)(rng), 600));
  std::size_t prev = SIZE_MAX;
  for (int thr = 0; thr <= 600; thr += 50) {
    std::size_t covered = 0;
    for (const auto& ses : shift_sessions(s, {}, thr)) covered += ses.length();
    EXPECT_LE(covered, prev);
    prev = covered;
  }
}

TEST(ShiftFeatures, Examples) {
  Shift s;
  s.duration_hours = 12.0;
  std::vector<Session> ss(24);
  for (std::size_t i = 0; i < ss.size(); ++i) ss[i].minute_indices = {static_cast<std::int64_t>(3 * i)};
  EXPECT_DOUBLE_EQ(shift_features(s, ss).sessions_per_hour, 2.0);

  s.duration_hours = 1.0;
  const std::vector<std::int64_t> t{0, 1, 4};
  const auto f = shift_features(s, segment_sessions(t));
  EXPECT_DOUBLE_EQ(f.sessions_per_hour, 2.0);
  EXPECT_DOUBLE_EQ(*f.avg_session_duration_min, 1.5);

  const auto none = shift_features(s, {});
  EXPECT_EQ(none.sessions_per_hour, 0.0);
  EXPECT_FALSE(none.avg_session_duration_min);
  EXPECT_EQ(none.n_sessions, 0u);

  s.duration_hours = 0.0;
  EXPECT_THROW(shift_features(s, {}), Error);
}

TEST(ShiftFeatures, RateScalesInverselyWithDuration) {
  const std::vector<std::int64_t> t{0, 2, 4, 6};
  const auto ss = segment_sessions(t);
  Shift a, b;
  a.duration_hours = 4.0;
  b.duration_hours = 8.0;
  EXPECT_DOUBLE_EQ(shift_features(a, ss).sessions_per_hour, 2.0 * shift_features(b, ss).sessions_per_hour);
}

TEST(ParticipantFeatures, Averaging) {
  BehaviorFeatures a{3.0, 4.0, 2}, b{5.0, std::nullopt, 0}, c{4.0, 6.0, 3};
  const std::vector<BehaviorFeatures> two{a, BehaviorFeatures{5.0, 4.0, 1}};
  EXPECT_DOUBLE_EQ(participant_features(two).sessions_per_hour, 4.0);
  const std::vector<BehaviorFeatures> three{a, b, c};
  const auto f = participant_features(three);
  EXPECT_DOUBLE_EQ(*f.avg_session_duration_min, 5.0);
  EXPECT_DOUBLE_EQ(f.sessions_per_hour, 4.0);
  const std::vector<BehaviorFeatures> same{a, a, a};
  const auto g = participant_features(same);
  EXPECT_DOUBLE_EQ(g.sessions_per_hour, a.sessions_per_hour);
  EXPECT_DOUBLE_EQ(*g.avg_session_duration_min, *a.avg_session_duration_min);
  EXPECT_EQ(g.n_sessions, 3 * a.n_sessions);  // a total, not a mean
  EXPECT_THROW(participant_features({}), Error);
}

TEST(Halves, SplitAtMidpointByFirstMinute) {
  Shift s;
  s.duration_hours = 12.0;
  EXPECT_EQ(half_of(s, 359), ShiftHalf::First);
  EXPECT_EQ(half_of(s, 360), ShiftHalf::Second);
  Session straddle;
  straddle.minute_indices = {358, 359, 360, 361};
  EXPECT_EQ(half_of(s, straddle), ShiftHalf::First);
}
