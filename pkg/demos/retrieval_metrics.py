"""Score a retrieval run with MRR / Answered@k and size a manual inspection.

Run with: python demos/retrieval_metrics.py
"""

import math

from queryfilter import answered_at_k, mrr, sample_size

# Rank of the first correct snippet per query; None = not in the candidate
# pool at all.
ranks = [1, 1, 2, 3, 1, 8, None, 4, 1, 12, None, 2, 5, 1, 30]

print(f"{len(ranks)} queries")
print(f"  MRR          {mrr(ranks):.4f}")
for k in (1, 5, 10):
    print(f"  Answered@{k:<3} {answered_at_k(ranks, k)}")

# ---------------------------------------------------------------------------
# How many items must an annotator look at to judge a corpus this size at a
# 95% confidence level and a 5% margin of error?
# ---------------------------------------------------------------------------
print()
for population in (500, 10_000, 394_471, math.inf):
    n = sample_size(population, confidence_z=1.96, p=0.5, c=0.05)
    label = "unbounded" if population == math.inf else f"{population:,}"
    print(f"  population {label:>9}: inspect {n} samples")
