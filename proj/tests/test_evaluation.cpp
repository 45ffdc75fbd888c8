#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "entail/evaluation.hpp"

using namespace entail;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() /
                 ("entail_eval_test_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

Dataset numbered_pairs(std::size_t n) {
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    SentencePair p;
    p.source = {"src" + std::to_string(i)};
    p.target = {"tgt" + std::to_string(i)};
    ds.push_back(std::move(p));
  }
  return ds;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("annotation sample export") {
  fs::path dir = temp_dir();
  Dataset pairs = numbered_pairs(40);
  std::vector<std::vector<std::string>> outputs;
  for (std::size_t i = 0; i < pairs.size(); ++i) outputs.push_back({"gen" + std::to_string(i)});

  SECTION("fixed seed gives the same sample every run") {
    export_annotation_sample(pairs, outputs, 10, 1, dir / "a.jsonl");
    export_annotation_sample(pairs, outputs, 10, 1, dir / "b.jsonl");
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    export_annotation_sample(pairs, outputs, 10, 2, dir / "c.jsonl");
    CHECK(slurp(dir / "a.jsonl") != slurp(dir / "c.jsonl"));
  }

  SECTION("records carry source, gold, generated and a null verdict") {
    export_annotation_sample(pairs, outputs, 5, 1, dir / "a.jsonl");
    std::ifstream in(dir / "a.jsonl");
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line)) {
      auto j = nlohmann::json::parse(line);
      const auto idx = j.at("index").get<std::size_t>();
      CHECK(j.at("source") == "src" + std::to_string(idx));
      CHECK(j.at("gold_target") == "tgt" + std::to_string(idx));
      CHECK(j.at("generated") == "gen" + std::to_string(idx));
      CHECK(j.at("verdict").is_null());
      ++count;
    }
    CHECK(count == 5);
  }

  SECTION("asking for more items than the corpus holds is an error") {
    CHECK_THROWS_AS(export_annotation_sample(pairs, outputs, 41, 1, dir / "x.jsonl"),
                    ConfigError);
  }

  SECTION("misaligned outputs are an error") {
    outputs.pop_back();
    CHECK_THROWS_AS(export_annotation_sample(pairs, outputs, 5, 1, dir / "x.jsonl"),
                    ConfigError);
  }
  fs::remove_all(dir);
}

TEST_CASE("annotation tally") {
  fs::path dir = temp_dir();

  SECTION("82 yes / 18 no tallies to 82 percent") {
    std::ofstream out(dir / "t.jsonl");
    for (int i = 0; i < 82; ++i) out << R"({"verdict":"yes"})" << "\n";
    for (int i = 0; i < 18; ++i) out << R"({"verdict":"no"})" << "\n";
    out.close();
    TallyResult r = tally_annotations(dir / "t.jsonl");
    CHECK(r.yes == 82);
    CHECK(r.no == 18);
    CHECK(r.accuracy_percent == Catch::Approx(82.0));
  }

  SECTION("unfilled verdicts abort listing the offending lines") {
    std::ofstream out(dir / "t.jsonl");
    out << R"({"verdict":"yes"})" << "\n";
    out << R"({"verdict":null})" << "\n";
    out << R"({"verdict":"maybe"})" << "\n";
    out.close();
    CHECK_THROWS_WITH(tally_annotations(dir / "t.jsonl"),
                      Catch::Matchers::ContainsSubstring("lines 2 3"));
  }

  SECTION("empty file is an error") {
    std::ofstream(dir / "t.jsonl").close();
    CHECK_THROWS_AS(tally_annotations(dir / "t.jsonl"), FormatError);
  }
  fs::remove_all(dir);
}
