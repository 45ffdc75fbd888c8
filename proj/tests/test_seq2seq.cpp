#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "entail/seq2seq.hpp"
#include "test_util.hpp"

using namespace entail;
namespace fs = std::filesystem;

namespace {

Vocabulary tiny_vocab(std::size_t corpus_tokens) {
  Dataset ds;
  SentencePair p;
  for (std::size_t i = 0; i < corpus_tokens; ++i) {
    p.source.push_back("w" + std::to_string(i));
  }
  p.target = {p.source.front()};
  ds.push_back(p);
  return build_vocabulary(ds, 1);
}

Seq2SeqParams tiny_model(const Vocabulary& vocab, std::size_t hidden, std::size_t dim,
                         bool attention, bool input_feeding = false,
                         std::uint64_t seed = 7) {
  ModelConfig config;
  config.hidden = hidden;
  config.embed_dim = dim;
  config.vocab_size = vocab.size();
  config.attention = attention;
  config.input_feeding = input_feeding;
  config.max_decode_len = 8;
  EmbeddingMatrix emb = init_embedding_matrix(vocab, nullptr, dim, seed);
  return Seq2SeqParams::init(config, emb, seed);
}

Batch batch_of(const Vocabulary& vocab, const Dataset& pairs) {
  return make_batches(pairs, vocab, pairs.size()).front();
}

double loss_value(Seq2SeqParams& params, const Batch& batch) {
  Graph g(false);
  return double(g.value(teacher_forced_loss(g, batch, params)).v[0]);
}

}  // namespace

TEST_CASE("encode") {
  Vocabulary vocab = tiny_vocab(8);
  Seq2SeqParams params = tiny_model(vocab, 5, 3, true);

  SECTION("length-1 sequence gives exactly one state equal to the final h") {
    Graph g;
    EncoderOutput out = encode(g, {{4}}, {{1}}, params);
    REQUIRE(out.states.size() == 1);
    CHECK(g.value(out.states[0]).v == g.value(out.final_state.h).v);
  }

  SECTION("identical sequences give identical state tensors") {
    auto run = [&]() {
      Graph g;
      EncoderOutput out = encode(g, {{1, 4, 5, 2}}, {{1, 1, 1, 1}}, params);
      return g.value(out.final_state.h).v;
    };
    CHECK(run() == run());
  }

  SECTION("padding does not change a row's final state") {
    Graph g1, g2;
    EncoderOutput plain = encode(g1, {{1, 4, 2}}, {{1, 1, 1}}, params);
    EncoderOutput padded = encode(g2, {{1, 4, 2, 0, 0}}, {{1, 1, 1, 0, 0}}, params);
    CHECK(g1.value(plain.final_state.h).v == g2.value(padded.final_state.h).v);
    CHECK(g1.value(plain.final_state.c).v == g2.value(padded.final_state.c).v);
  }

  SECTION("empty sequence is an error") {
    Graph g;
    CHECK_THROWS_AS(encode(g, {}, {}, params), ShapeError);
    CHECK_THROWS_AS(encode(g, {{}}, {{}}, params), ShapeError);
  }
}

TEST_CASE("decode_step") {
  Vocabulary vocab = tiny_vocab(8);

  SECTION("without attention the weights output is absent") {
    Seq2SeqParams params = tiny_model(vocab, 5, 3, false);
    Graph g;
    BoundModel model(g, params);
    EncoderOutput enc = model.encode({{1, 4, 2}}, {{1, 1, 1}});
    DecoderState state = model.initial_decoder_state(enc);
    DecodeStepResult res = model.decode_step({Vocabulary::kBos}, state, nullptr);
    CHECK_FALSE(res.attention_weights.has_value());
    CHECK(g.value(res.logits).cols() == vocab.size());
  }

  SECTION("with one unmasked encoder state the attention weight is 1") {
    Seq2SeqParams params = tiny_model(vocab, 5, 3, true);
    Graph g;
    BoundModel model(g, params);
    EncoderOutput enc = model.encode({{4, 5}}, {{1, 0}});
    AttentionCache cache = model.attention_cache(enc);
    DecoderState state = model.initial_decoder_state(enc);
    DecodeStepResult res = model.decode_step({Vocabulary::kBos}, state, &cache);
    REQUIRE(res.attention_weights.has_value());
    CHECK(g.value(*res.attention_weights).v[0] == Catch::Approx(1.0));
    CHECK(g.value(*res.attention_weights).v[1] == 0.0);
  }

  SECTION("attention weights sum to 1 at every step") {
    Seq2SeqParams params = tiny_model(vocab, 4, 3, true);
    Graph g;
    BoundModel model(g, params);
    EncoderOutput enc = model.encode({{1, 4, 5, 6, 2}}, {{1, 1, 1, 1, 1}});
    AttentionCache cache = model.attention_cache(enc);
    DecoderState state = model.initial_decoder_state(enc);
    int prev = Vocabulary::kBos;
    for (int t = 0; t < 4; ++t) {
      DecodeStepResult res = model.decode_step({prev}, state, &cache);
      state = res.state;
      scalar sum = 0;
      for (scalar w : g.value(*res.attention_weights).v) sum += w;
      REQUIRE(double(sum) == Catch::Approx(1.0).margin(1e-6));
      prev = 4;
    }
  }
}

TEST_CASE("teacher_forced_loss") {
  Vocabulary vocab = tiny_vocab(33);  // vocab size 37
  Dataset pairs = {
      {{"w0", "w1", "w2"}, {"w0", "w1"}, Split::train},
      {{"w3", "w4"}, {"w3", "w4", "w5"}, Split::train},
  };

  SECTION("untrained model loss is about ln V") {
    Seq2SeqParams params = tiny_model(vocab, 6, 4, true);
    const double loss = loss_value(params, batch_of(vocab, pairs));
    const double lnv = std::log(double(vocab.size()));
    CHECK(loss > 0.85 * lnv);
    CHECK(loss < 1.15 * lnv);
  }

  SECTION("loss is non-negative") {
    Seq2SeqParams params = tiny_model(vocab, 6, 4, false);
    CHECK(loss_value(params, batch_of(vocab, pairs)) >= 0.0);
  }

  SECTION("duplicating every pair leaves the mean loss unchanged") {
    Seq2SeqParams params = tiny_model(vocab, 6, 4, true);
    Dataset doubled = pairs;
    doubled.insert(doubled.end(), pairs.begin(), pairs.end());
    const double once = loss_value(params, batch_of(vocab, pairs));
    const double twice = loss_value(params, batch_of(vocab, doubled));
    CHECK(std::abs(once - twice) < 1e-6);
  }
}

TEST_CASE("end-to-end gradients match finite differences on a tiny config") {
  // h = 4, d = 4, V = 12, sentences of length <= 4
  Vocabulary vocab = tiny_vocab(8);
  REQUIRE(vocab.size() == 12);
  Dataset pairs = {
      {{"w0", "w1", "w2", "w3"}, {"w0", "w1"}, Split::train},
      {{"w4", "w5"}, {"w4", "w5", "w6"}, Split::train},
  };

  auto run_config = [&](bool attention, bool input_feeding) {
    Seq2SeqParams params = tiny_model(vocab, 4, 4, attention, input_feeding);
    Batch batch = batch_of(vocab, pairs);

    params.zero_grads();
    Graph g;
    g.backward(teacher_forced_loss(g, batch, params));

    double max_rel = 0;
    const double h = 1e-5;
    for (Parameter* p : params.parameters()) {
      for (std::size_t k = 0; k < p->value.v.size(); ++k) {
        const scalar saved = p->value.v[k];
        p->value.v[k] = saved + scalar(h);
        const double fp = loss_value(params, batch);
        p->value.v[k] = saved - scalar(h);
        const double fm = loss_value(params, batch);
        p->value.v[k] = saved;
        const double numeric = (fp - fm) / (2 * h);
        const double analytic = double(p->grad.v[k]);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
      }
    }
    INFO("attention=" << attention << " input_feeding=" << input_feeding
                      << " max rel err " << max_rel);
    CHECK(max_rel < 1e-4);
  };

  run_config(true, false);
  run_config(false, false);
  run_config(true, true);
}

TEST_CASE("greedy decoding") {
  Vocabulary vocab = tiny_vocab(8);

  SECTION("same input twice gives identical output") {
    Seq2SeqParams params = tiny_model(vocab, 5, 3, true);
    std::vector<std::string> source = {"w0", "w1", "w2"};
    CHECK(greedy_decode(source, params, vocab) == greedy_decode(source, params, vocab));
  }

  SECTION("output length never exceeds max_decode_len; ties pick the lowest id") {
    // All-zero weights make every logit equal, so argmax is id 0 (PAD),
    // which never terminates: the length cap must kick in.
    ModelConfig config;
    config.hidden = 3;
    config.embed_dim = 2;
    config.vocab_size = vocab.size();
    config.attention = false;
    config.max_decode_len = 6;
    Seq2SeqParams params = Seq2SeqParams::skeleton(config);
    std::vector<int> out = greedy_decode_ids({1, 4, 2}, params);
    REQUIRE(out.size() == 6);
    for (int id : out) CHECK(id == Vocabulary::kPad);
  }

  SECTION("empty source is an error") {
    Seq2SeqParams params = tiny_model(vocab, 5, 3, true);
    CHECK_THROWS_AS(greedy_decode({}, params, vocab), ConfigError);
  }
}

TEST_CASE("checkpoints") {
  fs::path dir = fs::temp_directory_path() / ("entail_ckpt_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  Vocabulary vocab = tiny_vocab(8);
  Seq2SeqParams params = tiny_model(vocab, 5, 3, true);

  SECTION("round-trip restores every tensor bit-exactly") {
    save_checkpoint(params, vocab, dir / "model.bin");
    Seq2SeqParams loaded = load_checkpoint(dir / "model.bin", vocab);
    auto a = params.parameters();
    auto b = loaded.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i]->name == b[i]->name);
      CHECK(a[i]->value.v == b[i]->value.v);
    }
  }

  SECTION("round-trip preserves greedy decode outputs exactly") {
    save_checkpoint(params, vocab, dir / "model.bin");
    Seq2SeqParams loaded = load_checkpoint(dir / "model.bin", vocab);
    std::vector<std::string> source = {"w2", "w3"};
    CHECK(greedy_decode(source, params, vocab) == greedy_decode(source, loaded, vocab));
  }

  SECTION("wrong vocabulary raises a hash mismatch") {
    save_checkpoint(params, vocab, dir / "model.bin");
    Vocabulary other = tiny_vocab(9);
    CHECK_THROWS_AS(load_checkpoint(dir / "model.bin", other), CheckpointHashError);
  }

  SECTION("truncated file raises a truncation error and returns no model") {
    save_checkpoint(params, vocab, dir / "model.bin");
    fs::resize_file(dir / "model.bin", fs::file_size(dir / "model.bin") - 17);
    CHECK_THROWS_AS(load_checkpoint(dir / "model.bin", vocab), CheckpointTruncatedError);
  }

  SECTION("a non-checkpoint file raises a version error") {
    std::ofstream(dir / "junk.bin") << "definitely not a checkpoint";
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.bin", vocab), CheckpointVersionError);
  }
  fs::remove_all(dir);
}
