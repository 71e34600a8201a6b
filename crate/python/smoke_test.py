#!/usr/bin/env python3
"""Builds the mtrd extension module, stages it, and exercises every binding.

Run from anywhere: `python3 python/smoke_test.py`. Exits nonzero on the first
failed check.
"""

import math
import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def stage_module() -> None:
    subprocess.run(["cargo", "build", "-p", "mtrd-py"], cwd=ROOT, check=True)
    stage = ROOT / "target" / "py-stage"
    stage.mkdir(parents=True, exist_ok=True)
    for name, dest in [("libmtrd.so", "mtrd.so"), ("libmtrd.dylib", "mtrd.so"), ("mtrd.dll", "mtrd.pyd")]:
        built = ROOT / "target" / "debug" / name
        if built.exists():
            shutil.copy2(built, stage / dest)
            sys.path.insert(0, str(stage))
            return
    sys.exit("no built extension found under target/debug")


stage_module()
import mtrd  # noqa: E402

CHECKS = 0


def check(ok: bool, what: str) -> None:
    global CHECKS
    if not ok:
        sys.exit(f"FAIL: {what}")
    CHECKS += 1


def h_b(p: float) -> float:
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


LN2 = math.log(2.0)

# Joint: entropies and mutual information against closed forms.
fair = mtrd.Joint(["X"], [2], [0.5, 0.5])
check(abs(fair.entropy(["X"]) - LN2) < 1e-12, "fair coin entropy != ln 2")

dsbs = mtrd.Joint(["X1", "X2"], [2, 2], [0.445, 0.055, 0.055, 0.445])
check(
    abs(dsbs.mutual_info(["X1"], ["X2"]) - (LN2 - h_b(0.11))) < 1e-12,
    "binary symmetric pair mutual information",
)
check(
    abs(dsbs.cond_entropy(["X1"], ["X2"]) - h_b(0.11)) < 1e-12,
    "conditional entropy of the noisy copy",
)
check(dsbs.marginal(["X1"]).probs == [0.5, 0.5], "marginal of a symmetric pair")

# attach: per-variable channels sever the outputs given their own source.
noisy = dsbs.attach(
    [
        ("X1", "Z1", [[0.9, 0.1], [0.2, 0.8]]),
        ("X2", "Z2", [[0.7, 0.3], [0.3, 0.7]]),
    ]
)
check(sorted(noisy.names) == ["X1", "X2", "Z1", "Z2"], "attach adds output variables")
lhs = noisy.mutual_info(["X1"], ["Z1"]) - noisy.mutual_info(["Z1"], ["Z2"])
rhs = noisy.cond_mutual_info(["X1"], ["Z1"], ["Z2"])
check(abs(lhs - rhs) < 1e-10, "conditional information identity on factorized joint")

# Model + spectrum: a fair coin's entropy density is a point mass at ln 2.
model = mtrd.Model.from_json(
    '{"alphabets": [{"variable": "X", "symbols": ["0", "1"]}],'
    ' "kind": "iid", "joint": [0.5, 0.5]}'
)
check(model.kind == "iid" and model.variable_names == ["X"], "model metadata")
sp = model.spectrum("entropy:X", 32)
check(abs(sum(m for _, m in sp.atoms()) - 1.0) < 1e-9, "spectrum masses sum to 1")
check(abs(sp.quantile(0.01) - LN2) < 1e-12, "constant density quantile")

# proxies: quantile offsets shrink with blocklength for a biased coin.
biased = mtrd.Model.from_json(
    '{"alphabets": [{"variable": "X", "symbols": ["0", "1"]}],'
    ' "kind": "iid", "joint": [0.89, 0.11]}'
)
est = mtrd.proxies([biased.spectrum("entropy:X", n) for n in (16, 64, 256)])
offsets = [max(abs(s - h_b(0.11)), abs(i - h_b(0.11))) for _, s, i in est["trajectory"]]
check(offsets[0] > offsets[1] > offsets[2], "proxy offsets shrink with n")
check(abs(est["sup"] - h_b(0.11)) < 0.12, "sup proxy near the entropy")

# region: lossless corner of the symmetric pair.
targets = [
    (mtrd.Measure.hamming([2, 2], 0), 0.0),
    (mtrd.Measure.hamming([2, 2], 1), 0.0),
]
front = mtrd.region(dsbs, ["X1", "X2"], targets, restarts=40)
check(abs(front["min_sum_rate"] - (LN2 + h_b(0.11))) < 1e-4, "lossless sum rate")
check(abs(front["subset_bounds"][3] - (LN2 + h_b(0.11))) < 1e-6, "joint subset bound")
check(len(front["corners"]) >= 1, "frontier has corners")

# wyner_ziv: a perfect decoder copy collapses the rate.
copy_pair = mtrd.Joint(["X", "S"], [2, 2], [0.5, 0.0, 0.0, 0.5])
rate = mtrd.wyner_ziv(copy_pair, "X", "S", mtrd.Measure.hamming([2], 0), 0.1)
check(rate < 5e-3, "copy side information rate")

# tail_check: exponential ceiling on the likelihood-ratio lower tail.
tc = mtrd.tail_check(dsbs, ["X2"], ["X1"], [[0.6, 0.4], [0.4, 0.6]], 6, 0.2)
check(tc["holds"] and tc["probability"] <= tc["bound"], "tail bound holds")
check(abs(tc["bound"] - math.exp(-6 * 0.2)) < 1e-12, "tail ceiling value")

# simulate: deterministic in the seed, lossless at generous rates.
sim_kwargs = dict(
    rates=[h_b(0.11) + 0.15, LN2 + 0.15],
    targets=targets,
    n=12,
    trials=200,
    seed=7,
    slacks=(0.35, 0.15, 0.33, 0.33),
    enforce_slack_relation=False,
)
pair_model = mtrd.Model.from_json(
    '{"alphabets": [{"variable": "X1", "symbols": ["0", "1"]},'
    ' {"variable": "X2", "symbols": ["0", "1"]}],'
    ' "kind": "iid", "joint": [0.445, 0.055, 0.055, 0.445]}'
)
a = mtrd.simulate(pair_model, **sim_kwargs)
b = mtrd.simulate(pair_model, **sim_kwargs)
check(a == b, "simulate is deterministic in the seed")
check(0.0 <= a["p_error"] <= 0.5, "error rate plausible at generous rates")
check(a["trials"] == 200 and len(a["mean_distortion"]) == 2, "stats shape")

# mixed_region: worst component dominates.
mixed = mtrd.Model.from_json(
    '{"alphabets": [{"variable": "X1", "symbols": ["0", "1"]},'
    ' {"variable": "X2", "symbols": ["0", "1"]}],'
    ' "kind": "mixed", "alpha": 0.5,'
    ' "components": [[0.475, 0.025, 0.025, 0.475], [0.4, 0.1, 0.1, 0.4]]}'
)
worst = mtrd.mixed_region(mixed, ["X1", "X2"], targets, restarts=40)
check(abs(worst["min_sum_rate"] - (LN2 + h_b(0.2))) < 1e-4, "mixture worst-case sum rate")

print(f"smoke test: {CHECKS} checks passed")
