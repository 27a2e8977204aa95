#pragma once

#include "skgc/trainer.hpp"

namespace testutil {

/// Four triples over five entities and two relations.
inline skgc::KnowledgeGraph toy_kg() {
  return skgc::KnowledgeGraph::from_triples(
      {{"a", "r", "b"}, {"b", "r", "c"}, {"a", "s", "d"}, {"d", "s", "e"}}, {{"c", "r", "d"}}, {{"e", "s", "a"}});
}

/// Ten triples, used where training needs several batches.
inline skgc::KnowledgeGraph ten_triple_kg() {
  return skgc::KnowledgeGraph::from_triples({{"a", "r", "b"},
                                             {"b", "r", "c"},
                                             {"c", "r", "d"},
                                             {"d", "r", "e"},
                                             {"e", "r", "f"},
                                             {"a", "s", "c"},
                                             {"b", "s", "d"},
                                             {"c", "s", "e"},
                                             {"d", "s", "f"},
                                             {"f", "t", "a"}},
                                            {{"a", "r", "f"}}, {{"b", "t", "e"}});
}

/// Small sparse-head configuration: K = 4, D = 8.
inline skgc::TrainConfig toy_config(skgc::HeadKind head = skgc::HeadKind::sparse) {
  skgc::TrainConfig c;
  c.model.dim = 8;
  c.model.encoder.embed_dim = 8;
  c.model.hidden = 6;
  c.model.head = head;
  c.model.truncation.K = 4;
  c.model.truncation.alpha_qry = 3.0;
  c.model.truncation.alpha_ans = 2.0;
  c.objective.beta = 0.3;
  c.objective.eta = 0.5;
  c.objective.similarity = {0.02, 0.5};
  c.batch_size = 4;
  c.epochs = 2;
  c.eval_every = 1;
  c.seed = 7;
  return c;
}

}  // namespace testutil
