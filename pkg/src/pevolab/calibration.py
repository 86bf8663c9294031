"""Frozen regression constants.

The boundedness theorems guarantee that these constants exist but say
nothing about their size, so each one was measured once on the pinned
corpora in tests/ (seeded RNG, fixed grids) and committed here.  The
regression suites assert against these values with the slack noted per
constant; re-measure and bump deliberately if the corpora ever change.
"""

#: Calderon-Vaillancourt ratio max ||op(p)u|| / (|p|_{2,2} ||u||) over the
#: pinned 30-probe corpus and symbol set; asserted with 5% slack.
C_CV = 1.0

#: Product-symbol seminorm ratios |p1 # p2|_{l,l} / (|p1|_{l+2,l+2}
#: |p2|_{l+2,l+2}) per derivative order l, measured on the pinned smooth
#: pairs; asserted with a factor-2 slack.
C_ELL = {0: 1.0, 1: 1.0}

#: Additive constant absorbing the commutator noise floor in the
#: amplification-rate bookkeeping; measured as the largest |d log sigma /
#: dt| * t observed on real-coefficient (zero-imaginary) runs, rounded up.
A_S = 0.01

#: Frequency-moment constant in |chi1(xi) xi^r|_{2,2} <= c1 n^r, measured
#: across the radius sweep for r <= 2; asserted with a factor-2 slack.
C1_FREQ_MOMENT = 4.0
