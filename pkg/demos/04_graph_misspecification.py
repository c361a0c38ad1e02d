"""
How wrong can the graph be?
===========================

The test needs a pathway graph, and curated pathways are never exactly
right. This script measures what happens when the graph handed to the
test is a damaged copy of the truth: edges deleted at random, or spurious
forward edges added.

Two things to watch: the type-I error under the null (does a wrong graph
break calibration?) and the power under a moderate shift (how much does
it cost?).
"""

from dataclasses import replace

from dagtest import EdgePerturbation, SimConfig, run_experiment

METHODS = ("t2dag_chi2", "t2dag_z")
BASE = SimConfig(n1=40, n2=40, p=30, p0_fraction=0.8, replicates=400, seed=13)

SCENARIOS = [
    ("correct graph", EdgePerturbation()),
    ("20% edges missing", EdgePerturbation("missing", 0.2)),
    ("40% edges missing", EdgePerturbation("missing", 0.4)),
    ("20% edges added", EdgePerturbation("redundant", 0.2)),
    ("40% edges added", EdgePerturbation("redundant", 0.4)),
]

for delta, label in ((0.0, "type-I error at alpha = 0.05"), (0.1, "power at delta = 0.1")):
    print(label)
    print(f"{'scenario':>20}" + "".join(f"{m:>14}" for m in METHODS))
    for name, pert in SCENARIOS:
        cfg = replace(BASE, delta=delta, perturbation=pert)
        table = run_experiment(cfg, METHODS, threads=4)
        rates = {row.method: row.rate for row in table.rows}
        print(f"{name:>20}" + "".join(f"{rates[m]:>14.3f}" for m in METHODS))
    print()

print("Deleting edges discards some of the precision structure; adding")
print("edges spends extra degrees of freedom on coefficients that are")
print("truly zero. Both leave the null calibration roughly intact, and the")
print("power loss stays modest even at 40% damage.")
