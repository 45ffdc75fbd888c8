#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "entail/corpus.hpp"
#include "entail/embeddings.hpp"

using namespace entail;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() /
                 ("entail_emb_test_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

Vocabulary vocab_of(std::vector<std::string> tokens) {
  Dataset ds;
  SentencePair p;
  p.source = std::move(tokens);
  p.target = {p.source.front()};
  ds.push_back(std::move(p));
  return build_vocabulary(ds, 1);
}

}  // namespace

TEST_CASE("text vector files") {
  fs::path dir = temp_dir();
  SECTION("headerless two-word file") {
    std::ofstream(dir / "v.txt") << "a 1.0 2.0\nb 3.0 4.0\n";
    WordVectors v = load_word_vectors(dir / "v.txt", VectorFormat::text);
    CHECK(v.dim == 2);
    REQUIRE(v.table.count("a") == 1);
    CHECK(v.table["a"] == std::vector<float>{1.0f, 2.0f});
    CHECK(v.table["b"] == std::vector<float>{3.0f, 4.0f});
  }
  SECTION("header word count is validated") {
    std::ofstream(dir / "v.txt") << "3 2\na 1.0 2.0\nb 3.0 4.0\n";
    CHECK_THROWS_AS(load_word_vectors(dir / "v.txt", VectorFormat::text), FormatError);
  }
  SECTION("inconsistent dimension names the line") {
    std::ofstream(dir / "v.txt") << "a 1.0 2.0\nb 3.0\n";
    CHECK_THROWS_WITH(load_word_vectors(dir / "v.txt", VectorFormat::text),
                      Catch::Matchers::ContainsSubstring("line 2"));
  }
  fs::remove_all(dir);
}

TEST_CASE("binary vector files") {
  fs::path dir = temp_dir();
  WordVectors v;
  v.dim = 3;
  v.table["alpha"] = {1.5f, -2.0f, 0.25f};
  v.table["beta"] = {0.0f, 7.0f, -1.0f};

  SECTION("round-trip through the binary writer") {
    save_word_vectors(v, dir / "v.bin", VectorFormat::binary);
    WordVectors back = load_word_vectors(dir / "v.bin");  // autodetect by extension
    CHECK(back.dim == 3);
    CHECK(back.table == v.table);
  }
  SECTION("truncated file reports a position") {
    save_word_vectors(v, dir / "v.bin", VectorFormat::binary);
    auto size = fs::file_size(dir / "v.bin");
    fs::resize_file(dir / "v.bin", size - 5);
    CHECK_THROWS_AS(load_word_vectors_binary(dir / "v.bin"), FormatError);
  }
  SECTION("unparseable header is an error") {
    std::ofstream(dir / "v.bin", std::ios::binary) << "not a header\n";
    CHECK_THROWS_WITH(load_word_vectors_binary(dir / "v.bin"),
                      Catch::Matchers::ContainsSubstring("header"));
  }
  fs::remove_all(dir);
}

TEST_CASE("init_embedding_matrix") {
  SECTION("pretrained rows copy their vector") {
    Vocabulary vocab = vocab_of({"a"});
    WordVectors v;
    v.dim = 2;
    v.table["a"] = {1.0f, 2.0f};
    EmbeddingMatrix m = init_embedding_matrix(vocab, &v, 0, 1);
    const std::size_t row = std::size_t(vocab.id("a"));
    CHECK(m.weights.at(row, 0) == 1.0);
    CHECK(m.weights.at(row, 1) == 2.0);
    CHECK(m.pretrained[row] == 1);
    CHECK(m.oov_fraction == 0.0);
  }
  SECTION("missing tokens fall inside the uniform bound and are flagged random") {
    Vocabulary vocab = vocab_of({"zzz"});
    WordVectors v;
    v.dim = 2;
    v.table["other"] = {0.0f, 0.0f};
    EmbeddingMatrix m = init_embedding_matrix(vocab, &v, 0, 1);
    const std::size_t row = std::size_t(vocab.id("zzz"));
    CHECK(m.pretrained[row] == 0);
    CHECK(std::abs(m.weights.at(row, 0)) <= kOovInitBound);
    CHECK(std::abs(m.weights.at(row, 1)) <= kOovInitBound);
    CHECK(m.oov_fraction == 1.0);
  }
  SECTION("same seed gives bit-identical matrices") {
    Vocabulary vocab = vocab_of({"a", "b", "c"});
    EmbeddingMatrix m1 = init_embedding_matrix(vocab, nullptr, 8, 99);
    EmbeddingMatrix m2 = init_embedding_matrix(vocab, nullptr, 8, 99);
    CHECK(m1.weights.v == m2.weights.v);
  }
  SECTION("specials are always randomly initialized") {
    Vocabulary vocab = vocab_of({"a"});
    WordVectors v;
    v.dim = 2;
    v.table["a"] = {1.0f, 2.0f};
    v.table["<pad>"] = {9.0f, 9.0f};  // must be ignored
    EmbeddingMatrix m = init_embedding_matrix(vocab, &v, 0, 1);
    CHECK(m.pretrained[Vocabulary::kPad] == 0);
    CHECK(m.weights.at(Vocabulary::kPad, 0) != 9.0);
  }
  SECTION("random values have mean 0 and variance 1 at 1e5 samples") {
    Vocabulary vocab = vocab_of({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
    EmbeddingMatrix m = init_embedding_matrix(vocab, nullptr, 7143, 7);  // 14 x 7143 = 100002
    REQUIRE(m.weights.size() >= 100000);
    double mean = 0;
    for (scalar x : m.weights.v) {
      REQUIRE(std::abs(x) <= kOovInitBound);
      mean += double(x);
    }
    mean /= double(m.weights.size());
    double var = 0;
    for (scalar x : m.weights.v) var += (double(x) - mean) * (double(x) - mean);
    var /= double(m.weights.size());
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);
  }
}
