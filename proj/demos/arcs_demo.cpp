// Arcs on the sphere: train the angle-based variants on a small version of
// the synthetic benchmark with 40% MNAR missingness, compare them with the
// Euclidean partial-distance baseline, and build a geodesic average of a few
// restarts.

#include "geolvq/geolvq.hpp"

#include <cstdio>

using namespace geolvq;

int main() {
  SynthConfig cfg;
  cfg.n_per_class = 150;
  cfg.n_test = 3000;
  cfg.missing_fraction = 0.4;
  cfg.missing_type = MissingType::MNAR;
  cfg.seed = 3;
  const auto bench = make_benchmark(cfg);
  std::printf("train %ld x %ld, hold-out %ld, missing %.2f\n", static_cast<long>(bench.train.size()),
              static_cast<long>(bench.train.dim()), static_cast<long>(bench.test.size()),
              1.0 - static_cast<double>(bench.train.mask().count()) / static_cast<double>(bench.train.mask().size()));

  for (Variant v : {Variant::AngleGlobal, Variant::AngleLocal, Variant::Probabilistic, Variant::EuclideanPartial}) {
    TrainConfig tc;
    tc.variant = v;
    tc.rank = 10;
    tc.epochs = 1000;
    tc.steepness = v == Variant::Probabilistic ? 2.0 : 1.0;
    const auto res = train_model(bench.train, tc);
    std::printf("%-18s error %.3f  (%d epochs)\n", to_string(v), evaluate(res.model, bench.test).error(),
                res.epochs_run);
  }

  std::vector<Model> models;
  for (std::uint64_t s = 1; s <= 8; ++s) {
    TrainConfig tc;
    tc.rank = 10;
    tc.epochs = 1000;
    tc.seed = s;
    models.push_back(train_model(bench.train, tc).model);
  }
  const auto avg = average_models(models, 1, &bench.train);
  const auto vote = majority_vote(models, bench.test);
  std::printf("geodesic average   error %.3f\n", evaluate(avg.best().model, bench.test).error());
  std::printf("majority vote      error %.3f\n", evaluate_predictions(bench.test.labels(), vote, 3).error());

  // Decision-surface crispness of a rank-3 probabilistic model.
  TrainConfig tc;
  tc.variant = Variant::Probabilistic;
  tc.rank = 3;
  tc.epochs = 500;
  tc.steepness = 2.0;
  Model plvq = train_model(generate_arcs(150, 4), tc).model;
  for (double theta : {0.1, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0}) {
    plvq.steepness = theta;
    std::printf("theta %6.1f  uncertain fraction %.3f\n", theta,
                uncertain_fraction(decision_surface_sample(plvq, 10000)));
  }
}
