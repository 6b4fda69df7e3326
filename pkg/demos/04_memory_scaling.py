"""Memory of the two 3D volumes against the all-pairs 4D volume.

For an N-pixel grid of fixed aspect, the 4D volume stores N^2 floats and the
pair of 3D volumes N^1.5.  The measured column traces real allocations while
the volumes are built.
"""

from factorflow import bench

points = bench.sweep_points((64, 64), (384, 384), 6)
records = bench.run_sweep(points, d=64, mode="measured", measure_cap=1 << 30)

print(f"{'grid':>9}  {'4D MiB':>10}  {'3D MiB':>8}  {'measured':>8}  ratio")
for r in records:
    peak = f"{r.measured_peak_bytes / 2**20:8.1f}" if r.measured_peak_bytes else "       -"
    print(f"{r.h:4d}x{r.w:<4d}  {r.allpairs_bytes / 2**20:10.1f}  {r.factorized_bytes / 2**20:8.1f}  {peak}  {r.element_ratio:5.1f}")

s_all, s_fac = bench.scaling_slopes(records)
print(f"\nlog-log slope vs pixel count: all-pairs {s_all:.3f}, factorized {s_fac:.3f}")

ref = bench.analytic_record(136, 240)
print(f"1088x1920 input (136x240 features): element ratio {ref.element_ratio:.1f}")
print(f"end-to-end reference memory: {bench.REFERENCE_END_TO_END_GB['allpairs']} GB vs "
      f"{bench.REFERENCE_END_TO_END_GB['factorized']} GB (includes every other buffer, hence the smaller ratio)")
