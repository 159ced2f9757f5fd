"""Rudin-Shapiro norms and the growth of the truncated convolution operator."""
from factorlab.counterexamples import ftp_growth_experiment, verify_rs_properties

for m in (2, 6, 10):
    rep = verify_rs_properties(m)
    band = rep["checks"]["norm_band"]["values"]
    print(f"m={m:2d}  L2={rep['checks']['l2_parseval']['value']:.4f}  L1={band['1.0']:.4f}  "
          f"Linf={band['inf']:.4f}  ok={rep['ok']}")

for p in (1.0, 2.0):
    t = ftp_growth_experiment(2.0, p, 12, m_start=6)
    print(f"r=2 p={p:g}: " + " ".join(f"{row['ratio']:.3g}" for row in t.rows) + f"  ok={t.ok}")
