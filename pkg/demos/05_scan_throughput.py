"""Single-thread scan speed: packed bits with popcount against float32 dot products."""

# %%
from ike.bench import paired_scan

for d in (256, 1024):
    rep = paired_scan(n=50_000, d=d, queries=10, runs=3)
    print(f"d=t={d:5d} bits {rep['bitwise_s'] * 1e3:7.1f} ms  float {rep['float_s'] * 1e3:7.1f} ms  "
          f"speedup {rep['speedup']:.1f}x  storage {rep['float_bytes_per_point'] // rep['bitwise_bytes_per_point']}x smaller")
print(rep["machine"])
