// Calibrates CP and CRCP on one synthetic Logistic draw with 20% uniform label
// noise and prints test coverage and mean set size for both.

#include <cstdio>

#include "rcp/rcp.hpp"

int main() {
  const std::size_t n = 2000;
  const double alpha = 0.1, epsilon = 0.2;

  const auto gen = rcp::make_logistic_generator(7);
  const auto noise = rcp::uniform_noise_model(gen.K, epsilon);
  auto data_rng = rcp::make_rng(7, rcp::Stream::kData);
  auto noise_rng = rcp::make_rng(7, rcp::Stream::kCorruption);

  const auto train = rcp::sample_logistic(gen, n, data_rng);
  const auto cal = rcp::sample_logistic(gen, n, data_rng);
  const auto test = rcp::sample_logistic(gen, n, data_rng);
  const auto noisy_train = rcp::corrupt_labels(train.y, noise, noise_rng);
  const auto noisy_cal = rcp::corrupt_labels(cal.y, noise, noise_rng);

  const auto clf = rcp::train_multinomial_lr(train.X, noisy_train, gen.K);
  auto score_rng = rcp::make_rng(7, rcp::Stream::kScoring);
  const auto cal_scores = rcp::scores_from_probabilities(
      rcp::score_file_from_probabilities(clf.predict_proba(cal.X), noisy_cal), false, score_rng);
  const auto test_scores = rcp::scores_from_probabilities(
      rcp::score_file_from_probabilities(clf.predict_proba(test.X), test.y), false, score_rng);

  const auto cp = rcp::conformal_quantile(cal_scores.observed_scores(), alpha);
  const auto crcp = rcp::crcp_threshold(cal_scores, noise, alpha);

  for (const auto* t : {&cp, &crcp}) {
    std::vector<rcp::LabelSet> sets;
    for (std::size_t r = 0; r < test_scores.n(); ++r) {
      sets.push_back(rcp::predict_set_classification(test_scores.row(r), *t));
    }
    const auto s = rcp::evaluate(std::span<const rcp::LabelSet>(sets), test_scores.labels());
    std::printf("%-4s  q_hat=%.4f  coverage=%.3f  mean size=%.3f\n", rcp::to_string(t->method),
                t->q_hat, s.coverage, s.mean_size);
  }
  std::printf("estimator bound B(n=%zu, eps=%.1f) = %.5f\n", n, epsilon,
              rcp::crcp_bound(noise, n).B);
}
