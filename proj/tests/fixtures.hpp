#pragma once

// Small hand-built graphs shared by unit and acceptance tests.

#include <string>
#include <utility>
#include <vector>

#include "synthkgqa/ids.hpp"
#include "synthkgqa/kg.hpp"

namespace fixtures {

using synthkgqa::KnowledgeGraph;
using synthkgqa::Triple;
using synthkgqa::make_triple;

inline const char* kFilmQuery =
    "SELECT ?answer WHERE { ?film wdt:P495 wd:Q38; wdt:P364 wd:Q150; wdt:P144 wd:Q769001; wdt:P57 ?answer.}";

inline std::vector<Triple> film_gt() {
  return {make_triple("Q3228085", "P495", "Q38"), make_triple("Q3228085", "P364", "Q150"),
          make_triple("Q3228085", "P144", "Q769001"), make_triple("Q3228085", "P57", "Q503508")};
}

/// The eight-triple Wikidata answer subgraph of the film question.
inline std::vector<Triple> film_wikidata_triples() {
  return {make_triple("Q2260875", "P495", "Q38"),     make_triple("Q2260875", "P364", "Q150"),
          make_triple("Q2260875", "P144", "Q769001"), make_triple("Q2260875", "P57", "Q679016"),
          make_triple("Q3228085", "P495", "Q38"),     make_triple("Q3228085", "P364", "Q150"),
          make_triple("Q3228085", "P144", "Q769001"), make_triple("Q3228085", "P57", "Q503508")};
}

inline std::vector<std::pair<std::string, std::string>> film_labels() {
  return {{"Q38", "Italy"},
          {"Q150", "French"},
          {"Q769001", "The Vicomte of Bragelonne: Ten Years Later"},
          {"Q3228085", "Le Vicomte de Bragelonne"},
          {"Q2260875", "Le Masque de fer"},
          {"Q503508", "Fernando Cerchio"},
          {"Q679016", "Henri Decoin"},
          {"P495", "country of origin"},
          {"P364", "original language of film or TV show"},
          {"P144", "based on"},
          {"P57", "director"}};
}

inline KnowledgeGraph film_wikidata() { return KnowledgeGraph::from_triples(film_wikidata_triples(), film_labels()); }
inline KnowledgeGraph film_wikikg2() { return KnowledgeGraph::from_triples(film_gt(), film_labels()); }

/// Film graph plus distractor films so that only the {French, based-on}
/// seed pair reproduces the full answer set.
inline KnowledgeGraph film_with_distractors() {
  auto t = film_wikidata_triples();
  auto film = [&](const std::string& id, const std::string& director, std::vector<std::pair<std::string, std::string>> props) {
    for (auto& [r, o] : props) t.push_back(make_triple(id, r, o));
    t.push_back(make_triple(id, "P57", director));
  };
  film("D1", "Dir1", {{"P495", "Q38"}});
  film("D2", "Dir2", {{"P364", "Q150"}});
  film("D3", "Dir3", {{"P144", "Q769001"}});
  film("D4", "Dir4", {{"P495", "Q38"}, {"P364", "Q150"}});
  film("D5", "Dir5", {{"P495", "Q38"}, {"P144", "Q769001"}});
  return KnowledgeGraph::from_triples(t, film_labels());
}

// Musical instrument question: Yehonatan Geffen's child and Francis
// Lickerish both play guitar.
inline std::vector<Triple> guitar_gt() {
  return {make_triple("Q2911403", "P40", "AvivGeffen"), make_triple("AvivGeffen", "P1303", "Q6607"),
          make_triple("Q3720616", "P1303", "Q6607")};
}

inline KnowledgeGraph guitar_kg() {
  auto t = guitar_gt();
  t.push_back(make_triple("AvivGeffen", "P1303", "Q5994"));
  t.push_back(make_triple("AvivGeffen", "P1303", "Q17172850"));
  return KnowledgeGraph::from_triples(t, {{"Q2911403", "Yehonatan Geffen"},
                                          {"AvivGeffen", "Aviv Geffen"},
                                          {"Q3720616", "Francis Lickerish"},
                                          {"Q6607", "guitar"},
                                          {"Q5994", "piano"},
                                          {"Q17172850", "voice"},
                                          {"P40", "child"},
                                          {"P1303", "instrument"}});
}

// Grandchild canonization status: a three-edge chain plus a direct edge.
inline std::vector<Triple> gregory_gt() {
  return {make_triple("Gregory", "P40", "Vrtanes"), make_triple("Vrtanes", "P40", "Husik"),
          make_triple("Husik", "P411", "saint")};
}

inline KnowledgeGraph gregory_kg() {
  auto t = gregory_gt();
  t.push_back(make_triple("Gregory", "P411", "saint"));
  return KnowledgeGraph::from_triples(t, {{"Gregory", "Gregory the Illuminator"},
                                          {"Vrtanes", "St. Vrtanes I"},
                                          {"Husik", "St. Husik I"},
                                          {"saint", "saint"},
                                          {"P40", "child"},
                                          {"P411", "canonization status"}});
}

// Country of the region containing a village: two-edge chain plus a
// direct country edge.
inline std::vector<Triple> weerdinge_gt() {
  return {make_triple("NieuwWeerdinge", "P131", "Emmen"), make_triple("Emmen", "P17", "Q55")};
}

inline KnowledgeGraph weerdinge_kg() {
  auto t = weerdinge_gt();
  t.push_back(make_triple("NieuwWeerdinge", "P17", "Q55"));
  return KnowledgeGraph::from_triples(t, {{"NieuwWeerdinge", "Nieuw-Weerdinge"},
                                          {"Emmen", "Emmen"},
                                          {"Q55", "Netherlands"},
                                          {"P131", "located in the administrative territorial entity"},
                                          {"P17", "country"}});
}

// Graph around Portugal used by the prompt-format and pipeline tests.
inline std::vector<Triple> portugal_triples() {
  return {make_triple("Q1024001", "P17", "Q45"),    make_triple("Q174785", "P915", "Q45"),
          make_triple("Q1024001", "P131", "Q428459"), make_triple("Q428459", "P17", "Q45"),
          make_triple("Q174785", "P915", "Q597"),   make_triple("Q45", "P36", "Q597"),
          make_triple("Q597", "P17", "Q45"),        make_triple("Q597", "P1376", "Q45"),
          make_triple("Q357932", "P27", "Q45"),     make_triple("Q357932", "P20", "Q428459"),
          make_triple("Q357932", "P39", "Q4294919"), make_triple("Q4294919", "P17", "Q45"),
          make_triple("Q4294919", "P1001", "Q45"),  make_triple("Q357932", "P106", "Q82955")};
}

inline std::vector<std::pair<std::string, std::string>> portugal_labels() {
  return {{"Q1024001", "Quiaios"},
          {"Q45", "Portugal"},
          {"Q174785", "Savage Nights"},
          {"Q428459", "Figueira da Foz"},
          {"Q597", "Lisbon"},
          {"Q357932", "Francisco Jos\u00e9 Fernandes Costa"},
          {"Q4294919", "Minister of Foreign Affairs"},
          {"Q82955", "politician"},
          {"P17", "country"},
          {"P915", "filming location"},
          {"P131", "located in the administrative territorial entity"},
          {"P36", "capital"},
          {"P1376", "capital of"},
          {"P27", "country of citizenship"},
          {"P20", "place of death"},
          {"P39", "position held"},
          {"P1001", "applies to jurisdiction"},
          {"P106", "occupation"}};
}

inline KnowledgeGraph portugal_kg() { return KnowledgeGraph::from_triples(portugal_triples(), portugal_labels()); }

}  // namespace fixtures
