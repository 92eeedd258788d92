#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "grl/csv.hpp"
#include "grl/rng.hpp"

using namespace grl;

namespace {

std::string slurp(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string tmp(const char* name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST(Csv, EmptyRowsGiveHeaderOnly) {
  const auto p = tmp("grl_csv_empty.csv");
  emit_csv({}, {"a", "b", "c"}, p);
  EXPECT_EQ(slurp(p), "a,b,c\n");
}

TEST(Csv, ColumnOrderFollowsSchema) {
  std::ostringstream os;
  write_csv(os, {{Cell{std::int64_t{1}}, Cell{std::string("x")}, Cell{2.5}}}, {"z", "y", "x"});
  EXPECT_EQ(os.str(), "z,y,x\n1,x,2.5\n");
}

TEST(Csv, QuotingAndLineEndings) {
  std::ostringstream os;
  write_csv(os, {{Cell{std::string("a,b")}, Cell{std::string("say \"hi\"")}, Cell{std::string("l1\nl2")}}}, {"p", "q", "r"});
  const std::string s = os.str();
  EXPECT_EQ(s, "p,q,r\n\"a,b\",\"say \"\"hi\"\"\",\"l1\nl2\"\n");
  EXPECT_EQ(s.find('\r'), std::string::npos);
  auto back = parse_csv(s);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1][0], "a,b");
  EXPECT_EQ(back[1][1], "say \"hi\"");
  EXPECT_EQ(back[1][2], "l1\nl2");
}

TEST(Csv, NumbersRoundTrip) {
  Rng rng(77);
  std::vector<CsvRow> rows;
  std::vector<double> xs;
  for (int i = 0; i < 2000; ++i) {
    const double x = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-30, 30));
    xs.push_back(x);
    rows.push_back({Cell{std::int64_t{i}}, Cell{x}});
  }
  std::ostringstream os;
  write_csv(os, rows, {"i", "x"});
  auto back = parse_csv(os.str());
  ASSERT_EQ(back.size(), rows.size() + 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_EQ(std::stoll(back[i + 1][0]), static_cast<long long>(i));
    const double y = std::stod(back[i + 1][1]);
    EXPECT_LE(std::abs(y - xs[i]), 1e-12 * std::abs(xs[i]));
    EXPECT_EQ(y, xs[i]);
  }
}

TEST(Csv, DecimalPointIsDot) {
  std::ostringstream os;
  write_csv(os, {{Cell{0.125}}}, {"v"});
  EXPECT_EQ(os.str(), "v\n0.125\n");
}

TEST(Csv, RaggedRowRejected) {
  std::ostringstream os;
  EXPECT_THROW(write_csv(os, {{Cell{1.0}}}, {"a", "b"}), ShapeMismatch);
}

TEST(Csv, UnwritablePathIsIoError) {
  EXPECT_THROW(emit_csv({}, {"a"}, "/nonexistent_dir_grl/x.csv"), IoError);
}
