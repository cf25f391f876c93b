"""The 2x2 ablation: {plain CE, CE + format loss} x {plain, formatted decoding}.

Formatted decoding eliminates length and source errors outright; the format
loss lowers error counts even without it. Uses a reduced grid so the demo
finishes in a few seconds; the acceptance suite runs the full one.

Run: python3 demos/05_ablation_grid.py
"""

from slotforge import run_ablation

result = run_ablation(n_train=200, n_test=80, seeds=(0, 1, 2), epochs=20, lr=0.5)
print(result.pretty())

print("\nmedians across seeds:")
print(f"  FE, plain decoding:  CE={result.cell('ce', 'plain').median_fe:.0f}"
      f"  CE+FL={result.cell('ce+fl', 'plain').median_fe:.0f}")
print(f"  F1: CE plain={result.cell('ce', 'plain').median_score:.3f}"
      f"  CE+FL+FD={result.cell('ce+fl', 'fd').median_score:.3f}")
