"""How the streaming histograms drive domain stretches and shrinks.

A feature histogram tracks each layer input with an exponential moving
average of batch counts plus two out-of-domain tallies.  When the tallies
grow, the domain stretches to the recorded extremes; when an edge bin and
its tally decay below the shrink threshold, the domain contracts.

Run: python demos/grid_adaptation.py
"""

import numpy as np

from adaptkan import AdaptConfig, FeatureHistogram, GridDomain, decide, shrink_threshold
from adaptkan.adapt import apply_adapt

rng = np.random.default_rng(1)
cfg = AdaptConfig(alpha=0.05, prune_patience=1, stretch_mode="half_max")
dom = GridDomain(-1.0, 1.0, omega=8, k=3)
hist = FeatureHistogram(dom, cfg.alpha)
coef = rng.standard_normal((1, dom.n_coef))

print(f"shrink threshold tau = {shrink_threshold(cfg):.4f}")
print(f"start: domain [{dom.a:+.3f}, {dom.b:+.3f}]")

# Phase 1: the data slowly drifts right, out of the initial domain.
print("\n-- drifting stream --")
for step in range(60):
    batch = rng.normal(0.5 + 0.05 * step, 0.4, size=64)
    hist.update(batch)
    decision = decide(hist, cfg)
    if decision.kind != "none":
        dom, coef, hist = apply_adapt(dom, coef, hist, decision, cfg)
        print(f"step {step:3d}: {decision.kind:7s} -> [{dom.a:+.3f}, {dom.b:+.3f}]")

# Phase 2: the data settles in a narrow band; stale edges get pruned.
print("\n-- settled stream --")
for step in range(200):
    batch = rng.normal(2.0, 0.3, size=64)
    hist.update(batch)
    decision = decide(hist, cfg)
    if decision.kind != "none":
        dom, coef, hist = apply_adapt(dom, coef, hist, decision, cfg)
        print(f"step {step:3d}: {decision.kind:7s} -> [{dom.a:+.3f}, {dom.b:+.3f}]")

print(f"\nfinal domain [{dom.a:+.3f}, {dom.b:+.3f}] "
      f"around data mean 2.0 +/- 0.3")
print("final histogram (EMA counts per bin):")
print(np.round(hist.hist, 2), " ood:", np.round(hist.ood_hist, 4))
