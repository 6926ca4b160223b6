#include "dressed/sequence_text.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

using namespace dressed;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ParseError parse_error_of(const std::string& text) {
  try {
    parse_sequence(text);
  } catch (const ParseError& e) {
    return e;
  }
  ADD_FAILURE() << "expected a parse error for:\n" << text;
  return ParseError(0, 0, "");
}

void expect_round_trip(const PulseSequence& seq) {
  const std::string text = render_sequence(seq);
  EXPECT_EQ(parse_sequence(text), seq) << text;
  EXPECT_EQ(render_sequence(parse_sequence(text)), text);
}

}  // namespace

TEST(ParseSequence, MinimalWait) {
  const auto seq = parse_sequence("prep A |0>\nwait 1.0\nread A P0\n");
  ASSERT_EQ(seq.instructions.size(), 3u);
  EXPECT_EQ(std::get<Prep>(seq.instructions[0]), (Prep{Spin::A, PrepState::zero}));
  EXPECT_EQ(std::get<Segment>(seq.instructions[1]), (Segment{1.0, {}}));
  EXPECT_EQ(seq.readout(), (Readout{Spin::A, ReadoutKind::P0}));
  EXPECT_DOUBLE_EQ(seq.total_duration(), 1.0);
}

TEST(ParseSequence, EmptyInputHasNoReadout) {
  const auto e = parse_error_of("");
  EXPECT_EQ(e.message(), "no readout");
  EXPECT_EQ(parse_error_of("# only a comment\n\n").message(), "no readout");
}

TEST(ParseSequence, SegmentWithDrives) {
  const auto seq = parse_sequence(
      "segment 2.5\n"
      "  drive B plus 9.59\n"
      "  drive B minus 4.13 det -0.5 phase pi/2  # trailing comment\n"
      "end\n"
      "dephase B 0 +1\n"
      "read B PB\n");
  const auto& seg = std::get<Segment>(seq.instructions[0]);
  ASSERT_EQ(seg.drives.size(), 2u);
  EXPECT_EQ(seg.drives[1], (DriveSpec{Spin::B, Transition::minus, 4.13, -0.5, std::numbers::pi / 2}));
  EXPECT_EQ(std::get<Dephase>(seq.instructions[1]), (Dephase{Spin::B, Level::zero, Level::plus}));
}

TEST(ParseSequence, AngleForms) {
  const auto seq = parse_sequence("rot A x+ -pi/2\nrot A y- 3pi/4\nrot B z 0.125\nrot A dq pi\nread A P-1\n");
  EXPECT_EQ(std::get<Rotate>(seq.instructions[0]).angle, -std::numbers::pi / 2);
  EXPECT_EQ(std::get<Rotate>(seq.instructions[1]).angle, 3.0 * std::numbers::pi / 4);
  EXPECT_EQ(std::get<Rotate>(seq.instructions[2]).angle, 0.125);
  EXPECT_EQ(std::get<Rotate>(seq.instructions[3]).angle, std::numbers::pi);
}

TEST(ParseSequence, ErrorLocations) {
  auto e = parse_error_of("prep A |0>\nwait -1\nread A P0\n");
  EXPECT_EQ(e.line(), 2);
  EXPECT_EQ(e.column(), 6);
  EXPECT_EQ(e.message(), "negative duration");

  e = parse_error_of("prep C |0>\nread A P0\n");
  EXPECT_EQ(e.line(), 1);
  EXPECT_EQ(e.column(), 6);

  e = parse_error_of("segment 1\n  drive B sideways 3\nend\nread A P0\n");
  EXPECT_EQ(e.line(), 2);
  EXPECT_EQ(e.column(), 11);

  e = parse_error_of("segment 1\n  drive B plus 3\nread A P0\n");
  EXPECT_EQ(e.line(), 3);

  e = parse_error_of("read A P0\nwait 1\n");
  EXPECT_EQ(e.line(), 2);
  EXPECT_EQ(e.message(), "instruction after readout");

  e = parse_error_of("drive A plus 1\nread A P0\n");
  EXPECT_EQ(e.line(), 1);

  e = parse_error_of("wait 1 2\nread A P0\n");
  EXPECT_EQ(e.column(), 8);

  e = parse_error_of("segment 1\nend\nfoo\n");
  EXPECT_EQ(e.line(), 3);
  EXPECT_EQ(e.column(), 1);

  e = parse_error_of("rot A x+ half\nread A P0\n");
  EXPECT_EQ(e.column(), 10);
}

TEST(ParseSequence, GoldenDeerFixtureMatchesBuilder) {
  const auto parsed = parse_sequence(read_file(std::string(DRESSED_FIXTURE_DIR) + "/deer_sq.seq"));
  EXPECT_EQ(parsed, make_deer(Basis::SQ, 4.0));
}

TEST(Builders, RoundTripThroughText) {
  for (double tau : {0.1, 1.0, 4.0, 17.3}) {
    expect_round_trip(make_deer(Basis::SQ, tau));
    expect_round_trip(make_deer(Basis::DQ, tau));
    expect_round_trip(make_ramsey(Basis::SQ, Level::plus, 1.5, tau));
    expect_round_trip(make_ramsey(Basis::DQ, DrivePair{7.3, 2.1}, 1.5, tau));
    expect_round_trip(make_spinlock(10.44, DrivePair{9.59, 4.13}, tau));
    expect_round_trip(make_spinlock(10.44, DrivePair{9.59, 4.13}, tau, 60.0));
  }
}

TEST(Builders, OutputsSatisfyInvariants) {
  for (const auto& seq : {make_deer(Basis::SQ, 3.0), make_deer(Basis::DQ, 3.0),
                          make_ramsey(Basis::DQ, Level::minus, 2.0, 5.0), make_spinlock(7.56, {7.56, 0.0}, 2.0)}) {
    EXPECT_NO_THROW(seq.validate());
  }
  EXPECT_DOUBLE_EQ(make_deer(Basis::SQ, 3.0).total_duration(), 3.0);
  EXPECT_THROW(make_deer(Basis::SQ, 0.0), std::invalid_argument);
  EXPECT_THROW(make_spinlock(0.0, {}, 1.0), std::invalid_argument);
}

TEST(Builders, RandomSequencesRoundTrip) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> kind(0, 4), small(0, 6), spin(0, 1);
  std::uniform_real_distribution<double> real(0.0, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    PulseSequence seq;
    seq.name = "random";
    const int n = 1 + small(rng);
    for (int k = 0; k < n; ++k) {
      const Spin s = spin(rng) ? Spin::B : Spin::A;
      switch (kind(rng)) {
        case 0: seq.instructions.push_back(Prep{s, static_cast<PrepState>(small(rng) % 5)}); break;
        case 1: seq.instructions.push_back(Rotate{s, static_cast<Axis>(small(rng)), real(rng) - 10.0}); break;
        case 2: seq.instructions.push_back(Dephase{s, Level::zero, Level::minus}); break;
        case 3: seq.instructions.push_back(Segment{real(rng), {}}); break;
        default: {
          Segment seg{real(rng), {}};
          seg.drives.push_back({s, spin(rng) ? Transition::plus : Transition::minus, real(rng), real(rng) - 10.0,
                                real(rng) / 3.0});
          seq.instructions.push_back(seg);
        }
      }
    }
    seq.instructions.push_back(Readout{Spin::A, ReadoutKind::PD});
    expect_round_trip(seq);
  }
}

TEST(PulseSequence, ReadoutCountEnforced) {
  PulseSequence seq;
  EXPECT_THROW(seq.validate(), std::invalid_argument);
  seq.instructions = {Readout{Spin::A, ReadoutKind::P0}, Readout{Spin::A, ReadoutKind::P0}};
  EXPECT_THROW(seq.validate(), std::invalid_argument);
}

TEST(RotationMatrix, UnitaryAndCalibrated) {
  for (int a = 0; a < 7; ++a) {
    EXPECT_LE(unitarity_error(rotation_matrix(static_cast<Axis>(a), 0.77)), 1e-14);
  }
  const Ket3 zero = QutritState::basis(Level::zero).amplitudes();
  const Ket3 flipped = rotation_matrix(Axis::x_plus, std::numbers::pi) * zero;
  EXPECT_NEAR(std::norm(flipped(index_of(Level::plus))), 1.0, 1e-15);
  const Ket3 bright = rotation_matrix(Axis::x_bright, std::numbers::pi) * zero;
  EXPECT_NEAR(std::norm(bright.dot(QutritState::bright().amplitudes())), 1.0, 1e-15);
  const Ket3 swapped = rotation_matrix(Axis::dq, std::numbers::pi) * QutritState::basis(Level::minus).amplitudes();
  EXPECT_NEAR(std::norm(swapped(index_of(Level::plus))), 1.0, 1e-15);
}
