#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "../fixtures.hpp"
#include "../oracles.hpp"
#include "synthkgqa/kg.hpp"
#include "synthkgqa/sampling.hpp"
#include "synthkgqa/sparql.hpp"
#include "synthkgqa/sparql_eval.hpp"

using namespace synthkgqa;
namespace sp = synthkgqa::sparql;

namespace {

EntitySet ents(std::initializer_list<const char*> ids) {
  EntitySet out;
  for (auto id : ids) out.insert(EntityId(id));
  return out;
}

}  // namespace

// ---- kg-core ----

TEST(KnowledgeGraph, EmptyStreams) {
  std::istringstream triples(""), labels("");
  auto kg = KnowledgeGraph::load(triples, &labels, nullptr);
  EXPECT_EQ(kg.num_triples(), 0u);
  EXPECT_THROW(kg.degree(EntityId("Q1")), NotFoundError);
}

TEST(KnowledgeGraph, FilmGraphDegrees) {
  auto kg = fixtures::film_wikidata();
  EXPECT_EQ(kg.num_triples(), 8u);
  EXPECT_EQ(kg.degree(EntityId("Q38")), 2u);
  EXPECT_EQ(kg.degree(EntityId("Q3228085")), 4u);
  EXPECT_EQ(kg.neighbors(EntityId("Q38")), ents({"Q2260875", "Q3228085"}));
}

TEST(KnowledgeGraph, LoadDeduplicatesAndReportsLines) {
  std::istringstream triples("a\tr\tb\na\tr\tb\nb\tr\tc\n");
  auto kg = KnowledgeGraph::load(triples);
  EXPECT_EQ(kg.num_triples(), 2u);
  EXPECT_EQ(kg.degree(EntityId("b")), 2u);

  std::istringstream bad("a\tr\tb\nonly\ttwo\n");
  try {
    KnowledgeGraph::load(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(KnowledgeGraph, MissingLabelsAreListed) {
  std::istringstream triples("a\tr\tb\nb\tr\tc\n"), labels("a\tA\nb\tB\n");
  try {
    KnowledgeGraph::load(triples, &labels, nullptr);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.ids(), std::vector<std::string>{"c"});
  }
}

TEST(KnowledgeGraph, ParallelEdgesAndSelfLoops) {
  auto kg = KnowledgeGraph::from_triples(
      {make_triple("a", "r", "b"), make_triple("a", "s", "b"), make_triple("c", "r", "c")}, {}, {EntityId("iso")});
  EXPECT_EQ(kg.neighbors(EntityId("a")), ents({"b"}));
  EXPECT_EQ(kg.degree(EntityId("a")), 2u);
  EXPECT_EQ(kg.degree(EntityId("c")), 2u);
  EXPECT_EQ(kg.neighbors(EntityId("c")), ents({"c"}));
  EXPECT_EQ(kg.degree(EntityId("iso")), 0u);
  EXPECT_TRUE(kg.neighbors(EntityId("iso")).empty());
}

TEST(Sampler, NodeLimitOneAndIsolatedStart) {
  auto kg = KnowledgeGraph::from_triples({make_triple("a", "r", "b")}, {}, {EntityId("iso")});
  auto s = sample_seed_graph(kg, EntityId("a"), {1, 10, 7});
  EXPECT_TRUE(s.edges.empty());
  ASSERT_EQ(s.nodes.size(), 1u);
  auto iso = sample_seed_graph(kg, EntityId("iso"), {5, 10, 7});
  EXPECT_TRUE(iso.edges.empty());
  EXPECT_EQ(iso.nodes.size(), 1u);
  EXPECT_THROW(sample_seed_graph(kg, EntityId("zzz"), {5, 10, 7}), NotFoundError);
}

TEST(Sampler, TriangleClosesForEverySeed) {
  auto kg = KnowledgeGraph::from_triples(
      {make_triple("a", "r", "b"), make_triple("b", "r", "c"), make_triple("c", "r", "a")});
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    auto s = sample_seed_graph(kg, EntityId("a"), {3, 10, seed});
    EXPECT_EQ(s.edges.size(), 3u) << seed;
  }
}

TEST(Sampler, ConnectedWithinLimitsAndReplayable) {
  std::mt19937_64 gen(11);
  std::vector<Triple> t;
  for (int i = 0; i < 300; ++i)
    t.push_back(make_triple("n" + std::to_string(gen() % 60), "r" + std::to_string(gen() % 4),
                            "n" + std::to_string(gen() % 60)));
  auto kg = KnowledgeGraph::from_triples(t);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SamplerConfig cfg{8, 12, seed};
    auto s = sample_seed_graph(kg, NodeIndex(seed % kg.num_entities()), cfg);
    auto again = sample_seed_graph(kg, NodeIndex(seed % kg.num_entities()), cfg);
    EXPECT_EQ(s.edges, again.edges);
    EXPECT_LE(s.nodes.size(), cfg.node_limit);
    // Every edge touches nodes visited so far; with BFS from the start the
    // sample must be connected.
    auto triples = s.triples(kg);
    if (triples.empty()) continue;
    auto nodes = nodes_of(triples);
    std::set<EntityId> reached{triples.front().head};
    for (bool grew = true; grew;) {
      grew = false;
      for (const auto& x : triples) {
        if (reached.count(x.head) != reached.count(x.tail)) {
          reached.insert(x.head);
          reached.insert(x.tail);
          grew = true;
        }
      }
    }
    EXPECT_EQ(reached, nodes);
  }
}

TEST(Sampler, EqualDegreesAreChosenUniformly) {
  // Star: center c with four leaves of degree 1; first pick is uniform.
  auto kg = KnowledgeGraph::from_triples({make_triple("c", "r", "l1"), make_triple("c", "r", "l2"),
                                          make_triple("c", "r", "l3"), make_triple("c", "r", "l4")});
  std::map<NodeIndex, int> counts;
  const int runs = 4000;
  for (int seed = 0; seed < runs; ++seed) counts[sample_seed_graph(kg, EntityId("c"), {2, 10, std::uint64_t(seed)}).nodes[1]]++;
  ASSERT_EQ(counts.size(), 4u);
  for (auto& [_, c] : counts) EXPECT_NEAR(c, runs / 4, runs / 4 * 0.15);
}

TEST(KHop, ChainAndStar) {
  auto chain = KnowledgeGraph::from_triples(
      {make_triple("s", "r", "x"), make_triple("x", "r", "y"), make_triple("y", "r", "z")});
  auto two = khop_neighborhood(chain, ents({"s"}), 2);
  EXPECT_EQ(two, (TripleSet{make_triple("s", "r", "x"), make_triple("x", "r", "y")}));
  auto star = KnowledgeGraph::from_triples({make_triple("c", "r", "a"), make_triple("b", "r", "c")});
  EXPECT_EQ(khop_neighborhood(star, ents({"c"}), 1).size(), 2u);
  EXPECT_THROW(khop_neighborhood(star, ents({"nope"}), 1), NotFoundError);
}

TEST(KHop, MatchesRelaxationOracleAndIsMonotone) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Triple> t;
    for (int i = 0; i < 25; ++i)
      t.push_back(make_triple("n" + std::to_string(gen() % 15), "r", "n" + std::to_string(gen() % 15)));
    auto kg = KnowledgeGraph::from_triples(t);
    std::set<std::string> seeds{t[0].head.str(), t[gen() % t.size()].tail.str()};
    EntitySet seed_ids;
    for (auto& s : seeds) seed_ids.insert(EntityId(s));
    TripleSet prev;
    for (unsigned k = 1; k <= 4; ++k) {
      auto got = khop_neighborhood(kg, seed_ids, k);
      EXPECT_EQ(got, oracle::khop(t, seeds, k));
      EXPECT_TRUE(std::includes(got.begin(), got.end(), prev.begin(), prev.end()));
      prev = got;
    }
  }
}

// ---- sparql-engine ----

TEST(Sparql, ParsesPromptReply) {
  auto ast = sp::parse_query("SELECT ?answer WHERE {wd:Q357932 wdt:P20 ?place. ?place wdt:P17 ?answer.}");
  ASSERT_EQ(ast.where.size(), 2u);
  EXPECT_EQ(ast.where[0].subject, sp::Term::constant("Q357932"));
  EXPECT_EQ(ast.where[0].predicate, sp::Term::constant("P20"));
  EXPECT_EQ(ast.where[1].object, sp::Term::variable("answer"));
  EXPECT_EQ(ast.projection, std::vector<std::string>{"answer"});
}

TEST(Sparql, PredicateListAbbreviation) {
  auto ast = sp::parse_query(fixtures::kFilmQuery);
  ASSERT_EQ(ast.where.size(), 4u);
  for (auto& p : ast.where) EXPECT_EQ(p.subject, sp::Term::variable("film"));
  EXPECT_EQ(ast.where[3].object, sp::Term::variable("answer"));
}

TEST(Sparql, PrefixesIrisAndObjectLists) {
  auto ast = sp::parse_query(
      "PREFIX ex: <http://example.org/>\n"
      "SELECT DISTINCT ?x WHERE { <http://www.wikidata.org/entity/Q1> <http://www.wikidata.org/prop/direct/P2> ?x, ex:y . "
      "?x P3 Q4 }");
  ASSERT_EQ(ast.where.size(), 3u);
  EXPECT_TRUE(ast.distinct);
  EXPECT_EQ(ast.where[0].subject.value, "Q1");
  EXPECT_EQ(ast.where[0].predicate.value, "P2");
  EXPECT_EQ(ast.where[1].object.value, "http://example.org/y");
  EXPECT_EQ(ast.where[2].object, sp::Term::constant("Q4"));
}

TEST(Sparql, RejectsUnsupportedConstructs) {
  for (const char* q : {"SELECT ?answer WHERE { FILTER(?answer != wd:Q1) }",
                        "SELECT ?answer WHERE { ?a wdt:P1 ?answer. OPTIONAL { ?a wdt:P2 ?b } }",
                        "SELECT ?answer WHERE { { ?a wdt:P1 ?answer } UNION { ?a wdt:P2 ?answer } }",
                        "SELECT ?answer WHERE { wd:Q1 wdt:P1/wdt:P2 ?answer }",
                        "SELECT ?answer WHERE { wd:Q1 wdt:P1* ?answer }",
                        "SELECT ?answer WHERE { ?answer wdt:P1 \"x\" }",
                        "SELECT ?answer WHERE { ?answer a wd:Q5 }",
                        "SELECT ?answer WHERE { ?answer wdt:P1 wd:Q1 } LIMIT 5",
                        "SELECT * WHERE { ?answer wdt:P1 wd:Q1 }",
                        "SELECT ?answer WHERE { ?answer ?answer wd:Q1 }"}) {
    EXPECT_THROW(sp::parse_query(q), UnsupportedFeature) << q;
  }
  try {
    sp::parse_query("SELECT ?answer WHERE { ?a wdt:P1 ?answer . FILTER(?a) }");
    FAIL();
  } catch (const UnsupportedFeature& e) {
    EXPECT_EQ(e.feature(), "FILTER");
    EXPECT_EQ(e.span().first, 43u);
  }
}

TEST(Sparql, SyntaxErrorsCarryPositions) {
  for (const char* q : {"SELECT ?answer WHERE { ?a wdt:P1 }", "SELECT WHERE { ?a wdt:P1 ?b }",
                        "SELECT ?answer WHERE { ?a wdt:P1 ?answer", "SELECT ?answer WHERE { ?a foo:P1 ?answer }",
                        "hello"}) {
    EXPECT_THROW(sp::parse_query(q), ParseError) << q;
  }
  try {
    sp::parse_query("SELECT ?answer WHERE { ?a wdt:P1 }");
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 33u);
  }
}

TEST(Sparql, ToConstructIsIdempotent) {
  auto ast = sp::parse_query(fixtures::kFilmQuery);
  auto c = sp::to_construct(ast);
  EXPECT_EQ(c.form, sp::QueryForm::Construct);
  EXPECT_EQ(c.construct_template, ast.where);
  EXPECT_EQ(c.where, ast.where);
  EXPECT_EQ(sp::to_construct(c), c);
  auto one = sp::to_construct(sp::parse_query("SELECT ?answer WHERE { wd:Q1 wdt:P1 ?answer }"));
  EXPECT_EQ(one.construct_template.size(), 1u);
}

TEST(Sparql, SerializeRoundTrip) {
  for (const char* q : {fixtures::kFilmQuery, "SELECT DISTINCT ?a ?b WHERE { ?a ?p ?b. ?b wdt:P1 <http://x.org/a#b> }",
                        "CONSTRUCT { ?a wdt:P1 wd:Q2 } WHERE { ?a wdt:P1 wd:Q2. ?a wdt:P3 ?c }"}) {
    auto ast = sp::parse_query(q);
    EXPECT_EQ(sp::parse_query(sp::serialize(ast)), ast) << sp::serialize(ast);
    EXPECT_EQ(sp::parse_query(sp::serialize(ast, {true})), ast);
  }
}

TEST(Sparql, FilmQueryOnBothGraphs) {
  auto ast = sp::parse_query(fixtures::kFilmQuery);
  EXPECT_EQ(sp::eval_select(fixtures::film_wikidata(), ast), ents({"Q503508", "Q679016"}));
  EXPECT_EQ(sp::eval_select(fixtures::film_wikikg2(), ast), ents({"Q503508"}));
  auto f = sp::eval_construct(fixtures::film_wikidata(), sp::to_construct(ast));
  auto expected = fixtures::film_wikidata_triples();
  EXPECT_EQ(f, TripleSet(expected.begin(), expected.end()));
}

TEST(Sparql, EdgeCases) {
  auto kg = fixtures::film_wikidata();
  EXPECT_TRUE(sp::eval_select(kg, sp::parse_query("SELECT ?answer WHERE { wd:Q999 wdt:P57 ?answer }")).empty());
  EXPECT_TRUE(sp::eval_construct(kg, sp::to_construct(sp::parse_query("SELECT ?answer WHERE { wd:Q38 wdt:P57 ?answer }"))).empty());
  EXPECT_THROW(sp::eval_select(kg, sp::parse_query("SELECT ?answer WHERE { ?x wdt:P57 ?y }")), QueryError);
  auto single = sp::eval_construct(kg, sp::to_construct(sp::parse_query(
                                           "SELECT ?answer WHERE { wd:Q3228085 wdt:P57 ?answer. wd:Q3228085 wdt:P495 wd:Q38 }")));
  EXPECT_EQ(single.size(), 2u);
}

TEST(Sparql, SynthesizedQueries) {
  auto gt = fixtures::guitar_gt();
  auto kg = fixtures::guitar_kg();
  TripleSet one{gt[2]};
  auto q1 = sp::synthesize_query(one, ents({"Q3720616"}), EntityId("Q6607"));
  EXPECT_EQ(q1, sp::parse_query("SELECT ?answer WHERE { wd:Q3720616 wdt:P1303 ?answer. }"));
  TripleSet two{gt[0], gt[1]};
  auto q2 = sp::synthesize_query(two, ents({"Q2911403"}), EntityId("Q6607"));
  EXPECT_EQ(q2, sp::parse_query("SELECT ?answer WHERE { ?v1 wdt:P1303 ?answer. wd:Q2911403 wdt:P40 ?v1. }"));
  EXPECT_EQ(sp::eval_select(kg, q2), ents({"Q6607", "Q5994", "Q17172850"}));
  EXPECT_THROW(sp::synthesize_query(one, ents({"Q3720616"}), EntityId("Q1")), ArgumentError);
}

TEST(Sparql, SynthesizedConstructCoversTree) {
  auto kg = fixtures::film_wikidata();
  auto gt = fixtures::film_gt();
  TripleSet g(gt.begin(), gt.end());
  auto q = sp::synthesize_query(g, ents({"Q38", "Q150", "Q769001"}), EntityId("Q503508"));
  auto f = sp::eval_construct(kg, sp::to_construct(q));
  EXPECT_TRUE(std::includes(f.begin(), f.end(), g.begin(), g.end()));
}

TEST(Sparql, MatchesBruteForceOnRandomGraphs) {
  std::mt19937_64 gen(2024);
  auto pick = [&](int n) { return static_cast<int>(gen() % n); };
  for (int trial = 0; trial < 150; ++trial) {
    const int nodes = 3 + pick(8), rels = 1 + pick(3);
    std::vector<Triple> t;
    for (int i = 0, m = 4 + pick(16); i < m; ++i)
      t.push_back(make_triple("e" + std::to_string(pick(nodes)), "p" + std::to_string(pick(rels)),
                              "e" + std::to_string(pick(nodes))));
    auto kg = KnowledgeGraph::from_triples(t);
    sp::QueryAst ast;
    const char* vars[] = {"answer", "x", "y"};
    for (int i = 0, m = 1 + pick(4); i < m; ++i) {
      auto node = [&]() {
        return pick(3) ? sp::Term::variable(vars[pick(3)]) : sp::Term::constant("e" + std::to_string(pick(nodes)));
      };
      auto s = node();
      auto p = pick(5) ? sp::Term::constant("p" + std::to_string(pick(rels))) : sp::Term::variable("pv");
      ast.where.push_back({s, p, node()});
    }
    ast.where.push_back({sp::Term::variable("answer"), sp::Term::constant("p0"), sp::Term::variable("y")});
    ast.projection = {"answer"};
    EntitySet expected;
    for (auto& s : oracle::select(t, ast.where, "answer")) expected.insert(EntityId(s));
    EXPECT_EQ(sp::eval_select(kg, ast), expected) << sp::serialize(ast);
    EXPECT_EQ(sp::eval_construct(kg, sp::to_construct(ast)), oracle::construct(t, ast.where)) << sp::serialize(ast);
  }
}
