#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lpal/dataset.hpp"
#include "lpal/graph.hpp"
#include "lpal/kernels.hpp"
#include "lpal/matrix.hpp"
#include "lpal/propagate.hpp"

namespace lpal {

enum class StrategyKind { random, uncertainty, coreset, ceal, jlp };
enum class Metric { euclidean, cosine };

StrategyKind parse_strategy(std::string_view name);
std::string_view strategy_name(StrategyKind kind);
Metric parse_metric(std::string_view name);

struct Strategy {
  StrategyKind kind = StrategyKind::uncertainty;
  double epsilon = 0.006;  // CEAL entropy threshold in nats
  double alpha = 0.99;   // jLP propagation parameter
  Metric metric = Metric::euclidean;  // CoreSet distance
  CgOptions cg;
};

// Inputs of one batch acquisition. Non-owning; everything must outlive the call.
struct AcquisitionContext {
  const Matrix* probs = nullptr;        // n x c classifier probabilities
  const Matrix* embeddings = nullptr;   // n x d' embeddings
  const SparseGraph* graph = nullptr;   // affinity graph on the embeddings (jLP)
  const LabelState* state = nullptr;
  std::uint64_t seed = 0;               // random strategy
  Exec exec = Exec::parallel;
};

struct Acquisition {
  std::vector<std::size_t> indices;  // in selection order
  std::vector<double> scores;        // score of each pick when it was selected
  std::vector<std::pair<std::size_t, int>> pseudo;  // CEAL pseudo-labels for the next cycle
};

// Greedy batch acquisition of b distinct unlabeled indices.
Acquisition acquire_batch(const AcquisitionContext& ctx, const Strategy& strat, std::size_t b);

// Entropy of every unlabeled row, aligned with state->unlabeled().
std::vector<double> score_uncertainty(const AcquisitionContext& ctx);

Acquisition select_random(const AcquisitionContext& ctx, std::size_t b);
Acquisition select_uncertainty(const AcquisitionContext& ctx, std::size_t b);
// Farthest-first traversal from L u S in the embedding space.
Acquisition select_coreset(const AcquisitionContext& ctx, std::size_t b,
                           Metric metric = Metric::euclidean);
Acquisition select_ceal(const AcquisitionContext& ctx, std::size_t b, double epsilon);
// Repeatedly takes the unlabeled node least similar on the manifold to L u S.
Acquisition select_jlp(const AcquisitionContext& ctx, std::size_t b, double alpha,
                       const CgOptions& cg = {});

// Per-unlabeled priority of a strategy before any greedy update, higher
// meaning acquired earlier. Aligned with state->unlabeled().
std::vector<double> ranking_scores(const AcquisitionContext& ctx, const Strategy& strat);

}  // namespace lpal
