#include <gtest/gtest.h>

#include <sstream>

#include "beamvi/io.hpp"

namespace beamvi {
namespace {

DiscreteField short_free_beam() {
  ScenarioConfig c = preset("free-beam");
  c.T = 0.01;
  c.reconstruct_T = 0.01;
  return simulate(c).field;
}

TEST(Trajectory, ReadBackGivesIdenticalDoubles) {
  const DiscreteField f = short_free_beam();
  std::stringstream ss;
  write_trajectory(ss, f);
  const DiscreteField g = read_trajectory(ss);
  ASSERT_EQ(g.rows(), f.rows());
  ASSERT_EQ(g.cols(), f.cols());
  EXPECT_EQ(g.dt(), f.dt());
  EXPECT_EQ(g.ds(), f.ds());
  for (int j = 0; j < f.rows(); ++j)
    for (int a = 0; a < f.cols(); ++a) EXPECT_EQ(g(j, a).matrix(), f(j, a).matrix());
}

TEST(Trajectory, RowLayout) {
  const DiscreteField f = short_free_beam();
  std::stringstream ss;
  write_trajectory(ss, f);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, kTrajectoryHeader);
  int count = 0;
  std::string last;
  while (std::getline(ss, line)) ++count, last = line;
  EXPECT_EQ(count, f.rows() * f.cols());
  // last node: no forward neighbour in either direction
  EXPECT_EQ(std::count(last.begin(), last.end(), ','), 27);
  EXPECT_NE(last.find("nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,nan"), std::string::npos);
}

TEST(Trajectory, StrainColumnsMatchField) {
  const DiscreteField f = short_free_beam();
  std::stringstream ss;
  write_trajectory(ss, f);
  std::string line;
  std::getline(ss, line);
  std::getline(ss, line);  // node (0, 0)
  std::vector<double> v;
  std::istringstream ls(line);
  for (std::string cell; std::getline(ls, cell, ',');) v.push_back(std::stod(cell));
  const AlgebraVector xi = xi_at(f, 0, 0), eta = eta_at(f, 0, 0);
  for (int k = 0; k < 6; ++k) {
    EXPECT_EQ(v[16 + k], xi.v(k));
    EXPECT_EQ(v[22 + k], eta.v(k));
  }
}

TEST(Trajectory, MalformedInputIsParseError) {
  {
    std::stringstream ss("j,t\n");
    EXPECT_THROW(read_trajectory(ss), ParseError);
  }
  {
    std::stringstream ss(std::string(kTrajectoryHeader) + "\n0,0,0,0,1\n");
    try {
      read_trajectory(ss);
      FAIL();
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2);
    }
  }
  {
    const DiscreteField f = short_free_beam();
    std::stringstream full;
    write_trajectory(full, f);
    std::string text = full.str();
    text.erase(text.rfind('\n', text.size() - 2) + 1);  // drop the last node
    std::stringstream ss(text);
    EXPECT_THROW(read_trajectory(ss), ParseError);
  }
  EXPECT_THROW(read_trajectory("/nonexistent/t.csv"), ParseError);
}

TEST(Trajectory, IdenticalRunsWriteIdenticalBytes) {
  std::stringstream a, b;
  write_trajectory(a, short_free_beam());
  write_trajectory(b, short_free_beam());
  EXPECT_EQ(a.str(), b.str());
}

TEST(Diagnostics, OneRowPerSliceAndNoetherSummary) {
  const DiscreteField f = short_free_beam();
  const ConservationReport r = time_report(f, beam_params(preset("free-beam")));
  std::stringstream ss;
  write_diagnostics(ss, r);
  std::vector<std::string> lines;
  for (std::string l; std::getline(ss, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), r.energy.size() + 2);
  EXPECT_EQ(lines.front(), "index,energy,J1,J2,J3,J4,J5,J6,momentum_drift,energy_drift");
  EXPECT_EQ(lines.back().rfind("noether,", 0), 0u);
  EXPECT_EQ(std::count(lines[1].begin(), lines[1].end(), ','), 9);
  EXPECT_EQ(std::count(lines.back().begin(), lines.back().end(), ','), 9);
}

TEST(CrossReport, NamesExcludedEdges) {
  CrossConsistency c;
  c.direction = "space";
  c.prescribed = false;
  c.window = 7;
  c.excluded = {0, 5, 6};
  c.gap_all = {0.0, 1e-3};
  c.gap_interior = {0.0, 1e-9};
  std::stringstream ss;
  write_cross_consistency(ss, c);
  const std::string s = ss.str();
  EXPECT_NE(s.find("boundary=natural"), std::string::npos);
  EXPECT_NE(s.find("interior_excludes=0;5;6"), std::string::npos);
  EXPECT_NE(s.find("1,0.001,1.0000000000000001e-09"), std::string::npos);
}

}  // namespace
}  // namespace beamvi
