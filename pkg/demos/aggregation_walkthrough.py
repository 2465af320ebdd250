"""How one instance's crowd labels turn into a label, and why p matters less than you'd think."""
import numpy as np

from crowdhps.core import EqualPerformance, LearnedPerformance
from crowdhps.posterior import (aggregate_label, bernoulli_likelihoods, posterior_class_probs,
                                prop1_counterexample, weighted_vote_score)

C = 3
pairs = [(0, 2), (1, 2), (2, 0), (3, 1), (4, 0)]   # (worker, class)

# with a shared accuracy the posterior argmax is plain majority vote, whatever p is
for p in (0.34, 0.6, 0.9, 0.99):
    print(f"p={p:<5} posterior={np.round(posterior_class_probs(pairs, EqualPerformance(p), C), 3)}"
          f"  label={aggregate_label(pairs, EqualPerformance(p), C)}")

# per-worker accuracies turn it into a weighted vote; workers 0 and 1 outweigh the tie
perf = LearnedPerformance({(0, 0): 0.9, (0, 1): 0.9, (0, 2): 0.6, (0, 3): 0.5, (0, 4): 0.55})
print("weighted scores", np.round(weighted_vote_score(pairs, perf, C, 0), 3))
print("learned label  ", aggregate_label(pairs, perf, C, 0))

# a non-uniform class prior can make any class the MAP label
labels = np.array([z for _, z in pairs])
lik = bernoulli_likelihoods(labels, 0.8, C)
prior = np.asarray(prop1_counterexample(C, labels, 1, lik))
post = prior * lik.prod(axis=0)
print("prior", np.round(prior, 4), "-> MAP", int(np.argmax(post)))
