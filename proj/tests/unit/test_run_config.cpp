#include "gsnn/run_config.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>

using namespace gsnn;

namespace {

bool mentions(const std::vector<std::string>& problems, const std::string& text) {
  return std::any_of(problems.begin(), problems.end(), [&](const std::string& p) { return p.find(text) != std::string::npos; });
}

}  // namespace

TEST_CASE("split_assignment") {
  CHECK(split_assignment(" a.b =  c d ") == std::pair<std::string, std::string>{"a.b", "c d"});
  CHECK(split_assignment("k=") == std::pair<std::string, std::string>{"k", ""});
  CHECK(split_assignment("k=a=b").second == "a=b");
  CHECK_THROWS_AS(split_assignment("novalue"), std::invalid_argument);
  CHECK_THROWS_AS(split_assignment(" = 3"), std::invalid_argument);
}

TEST_CASE("setting keys") {
  RunConfig c;
  c.set("task", "gscnn");
  c.set("seed", "12");
  c.set("sparsity.rho", "0.25");
  c.set("sparsity.groups", "auto");
  c.set("cnn.windows", "2, 4,6");
  c.set("cnn.head", "sigmoid");
  c.set("gscnn.init", "answers");
  c.set("train.optimizer", "momentum");
  c.set("data.holdout_labels", "NUM:dist, LOC:city");
  c.set("gsa.tied", "no");
  CHECK(c.task == TaskKind::Gscnn);
  CHECK(c.seed == 12u);
  CHECK(c.sparsity.rho == 0.25);
  CHECK(c.groups_auto);
  CHECK(c.cnn.windows == std::vector<int>{2, 4, 6});
  CHECK_FALSE(c.head_auto);
  CHECK(c.cnn.head == HeadKind::Sigmoid);
  CHECK(c.init == InitStrategy::Answers);
  CHECK(c.optimizer.kind == OptimizerKind::Momentum);
  CHECK(c.holdout_labels == std::vector<std::string>{"NUM:dist", "LOC:city"});
  CHECK_FALSE(c.tied);
  CHECK(c.assigned("cnn.windows"));
  CHECK_FALSE(c.assigned("cnn.filters"));

  CHECK_THROWS_WITH_AS(c.set("no.such", "1"), doctest::Contains("unknown config key"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(c.set("train.epochs", "ten"), doctest::Contains("train.epochs"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("seed", "-1"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("sparsity.eta", "0.1x"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("train.batch_size", "-5"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("gsa.tied", "maybe"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("sparsity.alpha", "inf"), std::invalid_argument);
}

TEST_CASE("dump lists every key and reloads to the same configuration") {
  fixture::TempDir dir("cfg");
  RunConfig c;
  c.set("task", "cnn");
  c.set("seed", "3");
  c.set("cnn.windows", "3,5");
  c.set("train.learning_rate", "0.0123");
  c.set("data.holdout_labels", "a,b");
  const std::string text = c.dump();
  for (const auto& key : RunConfig::keys()) CHECK(text.find(key + " = ") != std::string::npos);
  fixture::write_text(dir.file("c.cfg"), text);
  RunConfig back;
  back.load_file(dir.file("c.cfg"));
  CHECK(back.dump() == text);
}

TEST_CASE("config files report every malformed line") {
  fixture::TempDir dir("cfgerr");
  fixture::write_text(dir.file("bad.cfg"),
                      "# comment\n"
                      "seed = 1   # trailing comment\n"
                      "bogus = 2\n"
                      "\n"
                      "train.epochs = x\n"
                      "just words\n");
  RunConfig c;
  try {
    c.load_file(dir.file("bad.cfg"));
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    CHECK(what.find("bad.cfg:3") != std::string::npos);
    CHECK(what.find("bad.cfg:5") != std::string::npos);
    CHECK(what.find("bad.cfg:6") != std::string::npos);
    CHECK(what.find("bad.cfg:2") == std::string::npos);
  }
  CHECK(c.seed == 1u);
  CHECK_THROWS_AS(c.load_file(dir.file("missing.cfg")), std::invalid_argument);
}

TEST_CASE("text tasks resolve their own defaults") {
  RunConfig gsa;
  const RunConfig g = gsa.resolved();
  CHECK(g.epochs == 20);
  CHECK(g.batch_size == 100);
  CHECK(g.optimizer.kind == OptimizerKind::Momentum);
  CHECK(g.optimizer.learning_rate == 0.1);
  CHECK_FALSE(g.groups_auto);

  RunConfig text;
  text.set("task", "gscnn");
  const RunConfig t = text.resolved();
  CHECK(t.groups_auto);
  CHECK(t.sparsity.group_size == 10);
  CHECK(t.epochs == 10);
  CHECK(t.batch_size == 50);
  CHECK(t.optimizer.kind == OptimizerKind::Adam);
  CHECK(t.optimizer.learning_rate == 1e-3);

  text.set("train.epochs", "3");
  text.set("sparsity.groups", "4");
  const RunConfig u = text.resolved();
  CHECK(u.epochs == 3);
  CHECK_FALSE(u.groups_auto);
  CHECK(u.sparsity.groups == 4);
}

TEST_CASE("problems") {
  RunConfig c;
  auto p = c.problems("train");
  CHECK(mentions(p, "seed is required"));
  CHECK(mentions(p, "gsa training needs"));

  c.set("seed", "1");
  c.set("data.mnist_images", "/definitely/not/here");
  c.set("train.batch_size", "1");
  c.set("sparsity.rho", "1.5");
  p = c.problems("train");
  CHECK(mentions(p, "does not exist"));
  CHECK(mentions(p, "batch_size"));
  CHECK(mentions(p, "rho"));
  CHECK_THROWS_WITH_AS(c.validate("train"), doctest::Contains("invalid configuration"), std::invalid_argument);

  RunConfig text;
  text.set("task", "gscnn");
  text.set("seed", "1");
  text.set("gscnn.init", "answers");
  text.set("data.label_level", "middle");
  p = text.resolved().problems("train");
  CHECK(mentions(p, "exactly one of data.trec_train or data.questions"));
  CHECK(mentions(p, "needs data.answers"));
  CHECK(mentions(p, "label_level"));

  fixture::TempDir dir("prob");
  fixture::write_text(dir.file("q.tsv"), "a question\tx\n");
  RunConfig ok;
  ok.set("task", "cnn");
  ok.set("seed", "2");
  ok.set("data.questions", dir.file("q.tsv"));
  CHECK(ok.resolved().problems("train").empty());

  ok.set("out", dir.path());
  CHECK(mentions(ok.problems("eval"), "does not exist"));
  CHECK(ok.checkpoint_path() == (std::filesystem::path(dir.path()) / "model.gsnn1").string());
  ok.set("checkpoint", dir.file("q.tsv"));
  CHECK(ok.problems("eval").empty());
  CHECK(mentions(ok.problems("deploy"), "unknown command"));
}

TEST_CASE("settings handed to the trainers") {
  RunConfig c;
  c.set("task", "gscnn");
  c.set("seed", "9");
  c.set("train.epochs", "4");
  c.set("gscnn.recon_weight", "0");
  c.set("cnn.filters", "7");
  const GscnnConfig g = c.resolved().gscnn_config();
  CHECK(g.cnn.epochs == 4);
  CHECK(g.cnn.seed == 9u);
  CHECK(g.cnn.filters_per_window == 7);
  CHECK(g.cnn.batch_size == 50);
  CHECK(g.recon_weight == 0.0);

  RunConfig a;
  a.set("seed", "5");
  a.set("gsa.recon", "mse");
  const GsaTrainSettings s = a.gsa_settings();
  CHECK(s.seed == 5u);
  CHECK(s.recon == ReconKind::Mse);
  CHECK(s.epochs == 20);
}
