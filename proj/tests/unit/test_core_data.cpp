#include <gtest/gtest.h>

#include "egocomm/io.hpp"
#include "egocomm/synth.hpp"
#include "egocomm/text.hpp"
#include "helpers.hpp"

using namespace egocomm;
using egocomm::testing::recording;
using egocomm::testing::temp_dir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an egocomm::Error";
  return ErrorCode::IoError;
}

std::string rows_text(const std::vector<std::string>& rows) {
  std::string out = "frame_index,mfcc1,mfcc2,mfcc3,mfcc4,mfcc5,mfcc6,mfcc7,mfcc8,mfcc9,mfcc10,mfcc11,mfcc12,log_pitch,intensity,hf_lf_ratio\n";
  for (const auto& r : rows) out += r + "\n";
  return out;
}

std::string row(int index, int mfcc_count = 12) {
  std::string r = std::to_string(index);
  for (int k = 0; k < mfcc_count; ++k) r += ",0.5";
  return r + ",5.1,1.0,0.3";
}

Participant participant_with(std::string id, int n_shifts) {
  Participant p;
  p.participant_id = std::move(id);
  for (int k = 0; k < n_shifts; ++k) {
    Shift s;
    s.shift_id = p.participant_id + "_S" + std::to_string(k);
    s.duration_hours = 1.0;
    s.recordings.push_back(recording(s.shift_id + "_r0", 0, 5));
    p.shifts.push_back(s);
  }
  return p;
}

}  // namespace

TEST(ParseRecording, FullWindowWithoutLabels) {
  std::vector<std::string> rows;
  for (int i = 0; i < 2000; ++i) rows.push_back(row(i));
  const auto rec = parse_recording(rows_text(rows));
  EXPECT_EQ(rec.frames.size(), 2000u);
  EXPECT_FALSE(rec.labels.has_value());
}

TEST(ParseRecording, ElevenMfccColumnsIsMalformed) {
  EXPECT_EQ(code_of([] { parse_recording(rows_text({row(0), row(1, 11)})); }), ErrorCode::MalformedRow);
}

TEST(ParseRecording, NonNumericFieldIsMalformed) {
  EXPECT_EQ(code_of([] { parse_recording(rows_text({"0,a,0,0,0,0,0,0,0,0,0,0,0,5,1,0.3"})); }), ErrorCode::MalformedRow);
}

TEST(ParseRecording, RepeatedFrameIndex) {
  EXPECT_EQ(code_of([] { parse_recording(rows_text({row(0), row(1), row(1)})); }), ErrorCode::NonMonotoneFrameIndex);
}

TEST(ParseRecording, TooManyFrames) {
  std::vector<std::string> rows;
  for (int i = 0; i < 2001; ++i) rows.push_back(row(i));
  EXPECT_EQ(code_of([&] { parse_recording(rows_text(rows)); }), ErrorCode::TooManyFrames);
}

TEST(ParseRecording, EmptyPitchIsUnvoicedAndLabelsParse) {
  const std::string text =
      "frame_index,mfcc1,mfcc2,mfcc3,mfcc4,mfcc5,mfcc6,mfcc7,mfcc8,mfcc9,mfcc10,mfcc11,mfcc12,log_pitch,intensity,hf_lf_ratio,label\n"
      "0,1,1,1,1,1,1,1,1,1,1,1,1,,0.5,0.2,S\n"
      "1,1,1,1,1,1,1,1,1,1,1,1,1,5.3,0.9,0.4,FG\n";
  const auto rec = parse_recording(text);
  ASSERT_EQ(rec.frames.size(), 2u);
  EXPECT_FALSE(rec.frames[0].log_pitch.has_value());
  EXPECT_DOUBLE_EQ(*rec.frames[1].log_pitch, 5.3);
  ASSERT_TRUE(rec.labels);
  EXPECT_EQ((*rec.labels)[1], FrameClass::FG);
}

TEST(ParseRecording, NegativeIntensityRejected) {
  EXPECT_EQ(code_of([] { parse_recording(rows_text({"0,0,0,0,0,0,0,0,0,0,0,0,0,5,-1,0.3"})); }), ErrorCode::MalformedRow);
}

TEST(ParseRecording, RoundTripIsExact) {
  auto rec = recording("r", 3, 50);
  rec.frames[4].log_pitch.reset();
  rec.frames[7].mfcc[2] = 0.1 + 0.2;  // not representable in short decimal
  rec.labels = std::vector<FrameClass>(50, FrameClass::BG);
  const auto back = parse_recording(serialize_recording(rec), {}, "r", 3);
  EXPECT_EQ(back, rec);
}

TEST(ParseRecording, RoundTripWithOtherDelimiter) {
  const auto rec = recording("r", 0, 10);
  FeatureFileFormat tsv{'\t'};
  EXPECT_EQ(parse_recording(serialize_recording(rec, tsv), tsv, "r", 0), rec);
}

TEST(Teacher, RowsMustSumToOne) {
  EXPECT_EQ(code_of([] { parse_teacher("frame_index,p_fg,p_bg,p_s\n0,0.5,0.5,0.1\n"); }), ErrorCode::InvalidPosteriors);
  EXPECT_EQ(code_of([] { parse_teacher("frame_index,p_fg,p_bg,p_s\n0,1.2,-0.2,0\n"); }), ErrorCode::InvalidPosteriors);
  const auto tp = parse_teacher("frame_index,p_fg,p_bg,p_s\n0,0.2,0.3,0.5\n1,1,0,0\n", "r");
  ASSERT_EQ(tp.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(tp.rows[0][2], 0.5);
}

TEST(Teacher, AlignmentChecked) {
  const auto rec = recording("r", 0, 3);
  const auto tp = parse_teacher("frame_index,p_fg,p_bg,p_s\n0,1,0,0\n1,1,0,0\n", "r");
  EXPECT_EQ(code_of([&] { check_alignment(tp, rec); }), ErrorCode::InvalidPosteriors);
}

TEST(Surveys, RangesEnforced) {
  EXPECT_EQ(code_of([] { parse_surveys("participant_id,stai_total,irb_total\nP1,39,10\n"); }), ErrorCode::InvalidSurvey);
  EXPECT_EQ(code_of([] { parse_surveys("participant_id,stai_total,irb_total\nP1,80,50\n"); }), ErrorCode::InvalidSurvey);
  const auto s = parse_surveys("participant_id,stai_total,irb_total\nP1,,7\nP2,160,\n");
  EXPECT_FALSE(s.at("P1").stai_total);
  EXPECT_EQ(*s.at("P1").irb_total, 7);
  EXPECT_EQ(*s.at("P2").stai_total, 160);
}

TEST(Manifest, CountsPreservedThroughWriteAndRead) {
  Cohort c;
  c.participants = {participant_with("A", 5), participant_with("B", 5)};
  c.participants[1].work_unit = WorkUnit::ICU;
  c.participants[1].surveys.irb_total = 30;
  const auto dir = temp_dir("manifest_counts");
  write_cohort(c, dir);
  const auto back = read_cohort(dir);
  ASSERT_EQ(back.participants.size(), 2u);
  std::size_t shifts = 0;
  for (const auto& p : back.participants) shifts += p.shifts.size();
  EXPECT_EQ(shifts, 10u);
  EXPECT_EQ(back, c);
}

TEST(Manifest, UnknownWorkUnit) {
  const std::string m =
      R"({"type":"participant","participant_id":"A","sex":"male","age_group":"under40","work_unit":"ER","primary_shift":"day"})";
  EXPECT_EQ(code_of([&] { parse_manifest(m); }), ErrorCode::UnknownEnumLevel);
}

TEST(Manifest, DuplicateParticipant) {
  const std::string p =
      R"({"type":"participant","participant_id":"A","sex":"male","age_group":"under40","work_unit":"ICU","primary_shift":"day"})";
  EXPECT_EQ(code_of([&] { parse_manifest(p + "\n" + p + "\n"); }), ErrorCode::DuplicateParticipantId);
}

TEST(Manifest, MissingRecordingFile) {
  const auto dir = temp_dir("manifest_dangling");
  const std::string m =
      R"({"type":"participant","participant_id":"A","sex":"male","age_group":"under40","work_unit":"ICU","primary_shift":"day"}
{"type":"shift","participant_id":"A","shift_id":"S","shift_type":"day","start_time":"2026-01-01T07:00:00Z","duration_hours":12}
{"type":"recording","shift_id":"S","recording_id":"R","minute_index":0,"features":"features/R.csv"}
)";
  EXPECT_EQ(code_of([&] { parse_manifest(m, {dir, {}}); }), ErrorCode::DanglingRecordingRef);
}

TEST(Manifest, MinuteBeyondShiftRejected) {
  Cohort c;
  c.participants = {participant_with("A", 1)};
  c.participants[0].shifts[0].recordings[0].minute_index = 60;  // 1 h shift
  const auto dir = temp_dir("manifest_minute");
  write_cohort(c, dir);
  EXPECT_EQ(code_of([&] { read_cohort(dir); }), ErrorCode::InvalidShift);
}

TEST(FilterCompliant, ThresholdAndOrder) {
  Cohort c;
  c.participants = {participant_with("P3", 3), participant_with("P5", 5), participant_with("P7", 7)};
  const auto kept = filter_compliant(c, 5);
  ASSERT_EQ(kept.participants.size(), 2u);
  EXPECT_EQ(kept.participants[0].participant_id, "P5");
  EXPECT_EQ(kept.participants[1].participant_id, "P7");

  Cohort four;
  four.participants = {participant_with("P4", 4)};
  EXPECT_TRUE(filter_compliant(four, 5).participants.empty());
  EXPECT_EQ(filter_compliant(c, 1), c);
}

TEST(FilterCompliant, EmptyShiftsDoNotCount) {
  auto p = participant_with("P", 5);
  p.shifts[0].recordings.clear();
  Cohort c;
  c.participants = {p};
  EXPECT_TRUE(filter_compliant(c, 5).participants.empty());
}

TEST(FilterCompliant, IdempotentAndMonotone) {
  Cohort c;
  for (int n = 1; n <= 8; ++n) c.participants.push_back(participant_with("P" + std::to_string(n), n));
  for (int m = 1; m <= 8; ++m) {
    const auto once = filter_compliant(c, m);
    EXPECT_EQ(filter_compliant(once, m), once);
    if (m > 1) EXPECT_LE(once.participants.size(), filter_compliant(c, m - 1).participants.size());
  }
}

TEST(GeneratedData, SatisfiesParserInvariants) {
  synth::CohortConfig cfg;
  cfg.cells = {{WorkUnit::ICU, ShiftType::Day, 1}, {WorkUnit::Lab, ShiftType::Night, 1}};
  cfg.day_shift_hours = cfg.night_shift_hours = 1.0;
  cfg.frames_per_recording = 250;
  cfg.shifts_per_participant = 2;
  const auto [cohort, truth] = synth::gen_cohort(cfg);
  const auto dir = temp_dir("generated_roundtrip");
  write_cohort(cohort, dir);
  EXPECT_EQ(read_cohort(dir), cohort);
}
