"""Size of the largest resonance set in dyadic windows.

Run with ``python demos/resonance_counts.py``.
"""

from sphpoisson.resonance import growth_table

print(f"{'N':>4} {'sup #Lambda':>12} {'argmax k':>9} {'sup/N^2':>9} {'log2 growth':>12}")
for r in growth_table((8, 16, 32, 64, 128)):
    e = "" if r["exponent"] is None else f"{r['exponent']:.3f}"
    print(f"{r['N']:4d} {r['sup_count']:12d} {r['argmax_k']:9d} {r['ratio']:9.3f} {e:>12}")
