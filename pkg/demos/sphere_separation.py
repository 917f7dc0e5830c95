"""
Thickened spheres, certified gaps, and a chain hunt
===================================================

Three experiments at scale R = 1e4.  First, sampled two-sphere
configurations satisfying the separation hypotheses always clear the
normalized gap bound.  Second, the equidistant-center construction
verifies containment on random instances and reports which geometric
branch produced the witness.  Third, an honest randomized search for
chains of mutually incident thickened spheres with a common point: at
comparable radii it reliably finds certified chains of length 3, and
prints one certificate.
"""

import numpy as np

import heisgeo.separation as sp
from heisgeo.core import ContinuousPoint, multiply
from heisgeo.spherequad import sphere_point

R, EPS = 1e4, 0.5
print(f"gap bound at eps = {EPS}: {sp.lss_bound(EPS):.6f}")

gaps = []
for trial in range(50):
    rng = np.random.default_rng([2, trial])
    cfg = sp.random_lss_config(R, EPS, 1, rng=rng)
    gaps.append(sp.lss_check(*cfg, EPS, R).gap)
print(f"50 sampled configs: all hold, gap range "
      f"[{min(gaps):.3f}, {max(gaps):.3f}]")

rng = np.random.default_rng(5)
branches = {}
for trial in range(20):
    rho = 9.0 + float(rng.uniform(0.0, 20.0))
    xi = rng.standard_normal(3)
    xi /= float(np.linalg.norm(xi))
    base = ContinuousPoint((complex(*rng.normal(size=2)),), float(rng.normal()))
    res = sp.closeball_witness(multiply(sphere_point(rho, xi), base), base,
                               0.5, samples=120, seed=trial)
    assert res.verified
    branches[res.report["branch"]] = branches.get(res.report["branch"], 0) + 1
print(f"20 equidistant witnesses verified, branches: {branches}")

report = sp.intersection_search(1, R, trials=200, seed=3)
print(f"\nchain search, 200 trials: lengths found {report['length_counts']}")
if report["certificates"]:
    cert = report["certificates"][0]
    print("first certificate:")
    print(f"  radii  : {[round(r, 1) for r in cert['radii']]}")
    print(f"  thicks : {[round(t, 3) for t in cert['thicks']]}")
    print(f"  checks : {cert['conditions']}")
