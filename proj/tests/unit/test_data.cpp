#include "gsnn/batching.hpp"
#include "gsnn/data.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cstdint>
#include <set>

using namespace gsnn;
using fixture::TempDir;

namespace {

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
          static_cast<std::uint8_t>(v)};
}

std::vector<std::uint8_t> concat(std::initializer_list<std::vector<std::uint8_t>> parts) {
  std::vector<std::uint8_t> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("How far is it?") == Tokens{"how", "far", "is", "it", "?"});
  CHECK(tokenize("  \"Quoted,\" he said...") == Tokens{"\"", "quoted", ",", "\"", "he", "said", ".", ".", "."});
  CHECK(tokenize("don't stop -- now") == Tokens{"don't", "stop", "--", "now"});
  CHECK(tokenize("").empty());
}

TEST_CASE("mnist idx loading") {
  TempDir dir("idx");
  std::vector<std::uint8_t> pixels(2 * 4, 0);
  pixels[4] = 255;
  pixels[5] = 51;
  write_bytes(dir.file("img"), concat({be32(2051), be32(2), be32(2), be32(2), pixels}));
  write_bytes(dir.file("lab"), concat({be32(2049), be32(2), {7, 3}}));
  const ImageDataset d = load_mnist_idx(dir.file("img"), dir.file("lab"));
  CHECK(d.images.rows() == 2);
  CHECK(d.images.cols() == 4);
  CHECK(d.images.row(0).isZero(0.0));
  CHECK(d.images(1, 0) == 1.0);
  CHECK(d.images(1, 1) == doctest::Approx(0.2));
  CHECK(d.labels == std::vector<int>{7, 3});

  write_mnist_idx(d, dir.file("img2"), dir.file("lab2"));
  CHECK(fixture::read_bytes(dir.file("img2")) == fixture::read_bytes(dir.file("img")));
  CHECK(fixture::read_bytes(dir.file("lab2")) == fixture::read_bytes(dir.file("lab")));

  write_bytes(dir.file("bad"), concat({be32(2050), be32(2), be32(2), be32(2), pixels}));
  CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("bad"), dir.file("lab")), doctest::Contains("offset 0"), std::runtime_error);
  write_bytes(dir.file("short"), concat({be32(2051), be32(2), be32(2), be32(2), {1, 2, 3}}));
  CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("short"), dir.file("lab")), doctest::Contains("truncated"), std::runtime_error);
  write_bytes(dir.file("lab3"), concat({be32(2049), be32(3), {1, 2, 3}}));
  CHECK_THROWS_AS(load_mnist_idx(dir.file("img"), dir.file("lab3")), std::runtime_error);
  CHECK_THROWS_AS(load_mnist_idx(dir.file("missing"), dir.file("lab")), std::runtime_error);
}

TEST_CASE("the fetched mnist subset, when present, has the expected header") {
  const std::string img = fixture::source_path("data/mnist/images.idx3-ubyte");
  const std::string lab = fixture::source_path("data/mnist/labels.idx1-ubyte");
  if (!std::filesystem::exists(img)) return;
  const ImageDataset d = load_mnist_idx(img, lab);
  CHECK(d.images.rows() == 10000);
  CHECK(d.images.cols() == 784);
  CHECK(d.images.minCoeff() >= 0.0);
  CHECK(d.images.maxCoeff() <= 1.0);
}

TEST_CASE("trec format") {
  TempDir dir("trec");
  fixture::write_text(dir.file("t.label"),
                      "NUM:dist How far is it from Denver to Aspen ?\r\n"
                      "LOC:city What county is Modesto , California in ?\n"
                      "\n"
                      "NUM:dist How tall is the tower ?\n");
  const LabeledCorpus c = load_trec(dir.file("t.label"));
  REQUIRE(c.size() == 3);
  CHECK(c.label_names[static_cast<std::size_t>(c.labels[0][0])] == "NUM:dist");
  CHECK(c.hierarchy->parent("NUM:dist") == "NUM");
  CHECK(c.hierarchy->parent("LOC:city") == "LOC");
  CHECK(c.sentences[0].front() == "how");
  CHECK(c.label_counts() == std::vector<std::size_t>{2, 1});

  write_trec(c, dir.file("round.label"));
  CHECK(load_trec(dir.file("round.label")) == c);

  const LabeledCorpus top = c.coarsened();
  CHECK(top.label_names == std::vector<std::string>{"NUM", "LOC"});
  CHECK(top.labels[1] == std::vector<int>{1});

  fixture::write_text(dir.file("bad.label"), "NUM:dist fine\nnocolon here\n");
  CHECK_THROWS_WITH_AS(load_trec(dir.file("bad.label")), doctest::Contains(":2:"), std::runtime_error);
}

TEST_CASE("qa corpus format") {
  TempDir dir("qa");
  fixture::write_text(dir.file("q.tsv"), "How do I renew ?\t1a|2b\nWhere is the office ?\t2b\n");
  fixture::write_text(dir.file("a.tsv"), "1a\tRenew online .\n2b\tOn Main Street .\n2b\tOpen daily .\n");
  fixture::write_text(dir.file("h.tsv"), "1a\t1\n2b\t2\n");
  const LabeledCorpus c = load_qa_corpus(dir.file("q.tsv"), dir.file("a.tsv"), dir.file("h.tsv"));
  REQUIRE(c.size() == 2);
  CHECK(c.labels[0].size() == 2);
  CHECK(c.multi_label);
  CHECK(c.answers.at(c.label_id("2b")).size() == 2);
  CHECK(c.hierarchy->parent("1a") == "1");

  write_qa_corpus(c, dir.file("q2"), dir.file("a2"), dir.file("h2"));
  CHECK(load_qa_corpus(dir.file("q2"), dir.file("a2"), dir.file("h2")) == c);

  fixture::write_text(dir.file("empty.tsv"), "");
  const LabeledCorpus bare = load_qa_corpus(dir.file("q.tsv"), dir.file("empty.tsv"), "");
  CHECK(bare.answers.empty());
  CHECK_FALSE(bare.hierarchy.has_value());

  fixture::write_text(dir.file("bad_a.tsv"), "9z\tnobody asked\n");
  CHECK_THROWS_WITH_AS(load_qa_corpus(dir.file("q.tsv"), dir.file("bad_a.tsv"), ""), doctest::Contains("unknown label"),
                       std::runtime_error);
  fixture::write_text(dir.file("bad_q.tsv"), "no tab here\n");
  CHECK_THROWS_AS(load_qa_corpus(dir.file("bad_q.tsv"), "", ""), std::runtime_error);
}

TEST_CASE("synthetic corpora round trip through the on-disk formats") {
  TempDir dir("rt");
  Rng rng(4);
  fixture::TextSpec spec;
  spec.per_label = 5;
  const LabeledCorpus c = fixture::text_corpus(spec, rng);
  write_qa_corpus(c, dir.file("q"), dir.file("a"), dir.file("h"));
  CHECK(load_qa_corpus(dir.file("q"), dir.file("a"), dir.file("h")) == c);
}

TEST_CASE("corpus validation, subset and label bookkeeping") {
  LabeledCorpus c;
  c.add({"a"}, {"x"});
  c.add({"b"}, {"y", "x"});
  CHECK(c.label_id("y") == 1);
  CHECK(c.label_id("z") == -1);
  CHECK_NOTHROW(c.validate());
  const LabeledCorpus s = c.subset({1});
  CHECK(s.size() == 1);
  CHECK(s.label_names == c.label_names);
  CHECK_THROWS_AS(c.coarsened(), std::invalid_argument);
  c.labels[0] = {5};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("split_indices and flag_unseen") {
  Rng a(1), b(1);
  const auto s1 = split_indices(20, 0.25, a);
  const auto s2 = split_indices(20, 0.25, b);
  CHECK(s1 == s2);
  CHECK(s1.second.size() == 5);
  std::set<std::size_t> all(s1.first.begin(), s1.first.end());
  all.insert(s1.second.begin(), s1.second.end());
  CHECK(all.size() == 20);
  CHECK_THROWS_AS(split_indices(5, 1.0, a), std::invalid_argument);

  LabeledCorpus c;
  c.add({"q"}, {"seen"});
  c.add({"r"}, {"seen", "new"});
  CHECK(flag_unseen(c, {"seen"}) == std::vector<bool>{false, true});
}

TEST_CASE("batch schedule") {
  std::vector<std::size_t> order(10);
  for (std::size_t i = 0; i < 10; ++i) order[i] = i;
  auto sizes = [](const std::vector<Batch>& bs) {
    std::vector<std::size_t> s;
    for (const auto& b : bs) s.push_back(b.size());
    return s;
  };
  CHECK(sizes(BatchSchedule::chunk(order, 4)) == std::vector<std::size_t>{4, 4, 2});
  order.resize(5);
  CHECK(sizes(BatchSchedule::chunk(order, 4)) == std::vector<std::size_t>{5});

  BatchSchedule x(37, 6, Rng(3)), y(37, 6, Rng(3));
  for (int epoch = 0; epoch < 3; ++epoch) {
    const auto bx = x.next_epoch();
    CHECK(bx == y.next_epoch());
    std::size_t total = 0;
    for (const auto& b : bx) {
      CHECK(b.size() >= 2);
      total += b.size();
    }
    CHECK(total == 37);
  }
  CHECK_THROWS_AS(BatchSchedule(10, 1, Rng(1)), std::invalid_argument);
  CHECK_THROWS_AS(BatchSchedule(1, 4, Rng(1)), std::invalid_argument);
}

TEST_CASE("label hierarchy") {
  LabelHierarchy h;
  h.add("1a", "1");
  h.add("1a", "1");
  h.add("1b", "1");
  CHECK(h.children("1") == std::vector<std::string>{"1a", "1b"});
  CHECK_THROWS_AS(h.add("1a", "2"), std::invalid_argument);
  CHECK_THROWS_AS(h.parent("9"), std::out_of_range);
  const LabelHierarchy flat = LabelHierarchy::flat({"p", "q"});
  CHECK(flat.parent("q") == "q");
}
