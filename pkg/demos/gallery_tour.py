"""Walk through the gallery: which instances certify and how the needed cap grows."""
from factorlab.counterexamples import GALLERY_KINDS, REFINEMENTS, gallery
from factorlab.disentangle import disentangle, required_cap

for kind in GALLERY_KINDS:
    print(f"== {kind}")
    for params in REFINEMENTS[kind]:
        g = gallery(kind, **params)
        if kind == "homogeneity":
            lo, hi = required_cap(g.instance).best_constant
            print(f"  {params}: best constant in [{lo:.6g}, {hi:.6g}]")
            continue
        rep = disentangle(g.instance, A=g.predicted["constant"], explore=True)
        reached = f"cap {rep.cap:g}" if rep.certified else f"cap {rep.cap:g} exhausted"
        print(f"  {params}: {rep.outcome} at {reached}, needed cap >= {rep.required_cap_lower:.6g}"
              f" (labelled {g.verdict} at cap 1)")
