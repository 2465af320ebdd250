"""A full study on synthetic blobs: 17 candidates, every criterion, test losses of the winners.

Takes about ten seconds on one core.
"""
import logging

import numpy as np

from crowdhps.criteria import CriterionId
from crowdhps.lfc import default_search_space
from crowdhps.report import loss_reduction
from crowdhps.simulate import BlobScenario
from crowdhps.study import StudyConfig, run_study, winner_rows

logging.basicConfig(level=logging.WARNING)

train, test, full_crowd = BlobScenario(variant="rand-2").build(seed=3)
print(f"{train.num_instances} training instances, {train.crowd_labels.instances.size} crowd labels, "
      f"label noise {train.crowd_labels.label_noise(train.true_labels):.3f}")

cfg = StudyConfig("confusion", default_search_space("confusion"), budget=17, seed=3)
study = run_study(cfg, train, test)

print(f"\n{'criterion':<9} {'winner':>6} {'test loss':>10} {'se':>8}")
for name, cand, mean, se in winner_rows(study):
    print(f"{name:<9} {cand:>6} {mean:>10.4f} {se:>8.4f}")

base = study.mean_test_loss(CriterionId.DEF)
for c in (CriterionId.TRUE, CriterionId.ENS):
    pp, rel = loss_reduction(base, study.mean_test_loss(c))
    print(f"{c.value} vs def: {pp:+.2f} pp ({rel:+.1f}%)")

table = study.criteria.table
print("\nrisks of the first five evaluated candidates,", ", ".join(c.value for c in table.columns))
print(np.round(table.risks[:5], 3))
