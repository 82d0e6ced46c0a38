"""
Sampling the structural inequalities
====================================

Every inequality behind the regularity theory can be sampled.  A campaign
draws pairs of vectors over many orders of magnitude and forces a share of
them into thin shells around the unit sphere, where the field switches on.
"""

from widedeg.inequality_lab import SampleCampaign, check_pair_ellipticity, run_campaign

# a single hand-checkable instance
print("pair ellipticity margin at (2,0), (0.5,0), p=2:", check_pair_ellipticity([2, 0], [0.5, 0], 2))

camp = SampleCampaign(seed=1, count=20_000, p_values=(2.0, 3.0), dimensions=(2,))
for rep in run_campaign(camp):
    print(f"{rep.lemma:<18} p={rep.p:g} violations={rep.violations} "
          f"worst relative margin={rep.worst_relative_margin:.2e}")

# inflating the reference constant must be caught
broken = SampleCampaign(seed=1, count=5_000, p_values=(2.0,), dimensions=(2,),
                        lemmas=("pair_ellipticity",), c_star_scale=1e6)
rep = run_campaign(broken)[0]
print("broken constant: violations =", rep.violations, "worst sample =", rep.worst_sample)
