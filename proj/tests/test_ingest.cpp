#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rcp/ingest.hpp"
#include "rcp/random.hpp"

using namespace rcp;

namespace {

ScoreFile parse(const std::string& text) {
  std::istringstream in(text);
  return parse_score_file(in);
}

std::size_t error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(ParseScoreFile, WellFormedProbabilities) {
  const auto sf = parse("p_1,p_2,p_3,label\n0.7,0.2,0.1,1\n0.1,0.1,0.8,3\n");
  EXPECT_EQ(sf.n(), 2u);
  EXPECT_EQ(sf.K, 3u);
  EXPECT_EQ(sf.kind, ScoreKind::probabilities);
  EXPECT_EQ(sf.labels, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(sf.row(1)[2], 0.8);
}

TEST(ParseScoreFile, ToleratesWhitespaceAndBlankLines) {
  const auto sf = parse("\np_1, p_2,label\r\n 0.5 ,0.5, 2\r\n\n0.25,0.75,1\n");
  EXPECT_EQ(sf.n(), 2u);
  EXPECT_EQ(sf.labels, (std::vector<std::size_t>{1, 0}));
}

TEST(ParseScoreFile, ScoresKindSkipsSumCheck) {
  const auto sf = parse("s_1,s_2,label\n3.5,-1,2\n");
  EXPECT_EQ(sf.kind, ScoreKind::scores);
  EXPECT_EQ(sf.row(0)[0], 3.5);
}

TEST(ParseScoreFile, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("p_1,p_2,p_3,label\n0.7,0.2,0.1,1\n0.5,0.3,0.1,2\n"), 3u);
  EXPECT_EQ(error_line("p_1,p_2,label\n0.5,0.5,0\n"), 2u);
  EXPECT_EQ(error_line("p_1,p_2,label\n0.5,0.5,3\n"), 2u);
  EXPECT_EQ(error_line("p_1,p_2,label\n0.5,0.5\n"), 2u);
  EXPECT_EQ(error_line("p_1,p_2,label\n0.5,abc,1\n"), 2u);
  EXPECT_EQ(error_line("p_1,p_2,label\n0.5,0.5,1.5\n"), 2u);
  EXPECT_EQ(error_line("p_1,p_2,label\n1.5,-0.5,1\n"), 2u);
  EXPECT_EQ(error_line("q_1,q_2,label\n"), 1u);
  EXPECT_EQ(error_line("p_1,p_3,label\n"), 1u);
  EXPECT_EQ(error_line("p_1,p_2,label\n"), 1u);
  EXPECT_EQ(error_line(""), 1u);
}

TEST(ParseScoreFile, ExpectedKMismatch) {
  std::istringstream in("p_1,p_2,label\n0.5,0.5,1\n");
  EXPECT_THROW(parse_score_file(in, 3), ParseError);
}

TEST(ScoreFileIo, RoundTripIsExact) {
  Rng rng = make_rng(1, Stream::kData);
  ScoreFile sf;
  sf.K = 4;
  for (std::size_t r = 0; r < 50; ++r) {
    double total = 0.0;
    std::vector<double> row(4);
    for (auto& v : row) total += (v = uniform01(rng) + 1e-3);
    for (auto& v : row) sf.values.push_back(v / total);
    sf.labels.push_back(r % 4);
  }
  std::stringstream buf;
  write_score_file(buf, sf);
  const auto back = parse_score_file(buf);
  EXPECT_EQ(back.values, sf.values);
  EXPECT_EQ(back.labels, sf.labels);
  EXPECT_EQ(back.K, sf.K);
}

TEST(ScoreFileIo, LoadReportsPathAndLine) {
  const auto path = std::filesystem::temp_directory_path() / "rcp_test_bad_scores.csv";
  {
    std::ofstream out(path);
    out << "p_1,p_2,label\n0.5,0.5,1\n0.2,0.2,1\n";
  }
  try {
    load_score_file(path.string());
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::filesystem::remove(path);
  EXPECT_THROW(load_score_file("/nonexistent/scores.csv"), InputError);
}

TEST(ScoresFromProbabilities, DeterministicAps) {
  const auto sf = parse("p_1,p_2,p_3,label\n0.7,0.2,0.1,1\n");
  Rng rng = make_rng(2, Stream::kScoring);
  const auto cal = scores_from_probabilities(sf, false, rng);
  EXPECT_NEAR(cal.score(0, 0), 0.7, 1e-15);
  EXPECT_NEAR(cal.score(0, 1), 0.9, 1e-15);
  EXPECT_NEAR(cal.score(0, 2), 1.0, 1e-15);
  EXPECT_EQ(cal.label(0), 0u);
}

TEST(ScoresFromProbabilities, ScoreFilesPassThrough) {
  const auto sf = parse("s_1,s_2,label\n0.3,0.8,2\n");
  Rng rng = make_rng(3, Stream::kScoring);
  const auto cal = scores_from_probabilities(sf, true, rng);
  EXPECT_EQ(cal.score(0, 0), 0.3);
  EXPECT_EQ(cal.score(0, 1), 0.8);
}

TEST(Sidecar, ResolvesRelativePaths) {
  const auto dir = std::filesystem::temp_directory_path() / "rcp_test_sidecar";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "side.json");
    out << R"({"calibration":"cal.csv","test":"/abs/test.csv","noise_model":"n.json"})";
  }
  const auto s = load_sidecar((dir / "side.json").string());
  EXPECT_EQ(s.calibration, (dir / "cal.csv").string());
  EXPECT_EQ(s.test, "/abs/test.csv");
  EXPECT_EQ(s.noise_model, (dir / "n.json").string());
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"calibration":"cal.csv"})";
  }
  EXPECT_THROW(load_sidecar((dir / "bad.json").string()), InputError);
  std::filesystem::remove_all(dir);
}
