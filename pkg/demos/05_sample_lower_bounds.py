"""Why a sample count of order 1/rho is unavoidable.

Telling a coin that never lands heads from one with bias just over 2 varrho
takes about ln(1/delta - 1)/(4 varrho) tosses.  The second half runs the
multiplier search on a three-element instance with and without a second
scenario of mass 3 kappa.  A single sample almost never shows that scenario.
"""

from riskaverse.experiments import coin_experiment, lower_bound_demo

table = coin_experiment(varrho=0.05, delta=0.25, trials=10_000, sample_counts=[1, 2, 6, 12, 25, 50])
print(f"threshold: {table.threshold:.2f} tosses")
print("tosses  error(q=0)  error(q=2varrho+xi)")
for row in table.rows:
    print(f"{row.tosses:6d}  {row.error_fair:10.4f}  {row.error_biased:10.4f}")
# the zero-heads rule needs about ln(1/delta)/q tosses to push the biased arm below delta,
# roughly 13 here, more than the threshold formula gives

rep = lower_bound_demo(B=12.0, rho=0.1, kappa=0.02, trials=200)
print(f"\nsecond scenario absent: sum x = {rep.arm_small['sum_x']:.4f}")
print(f"second scenario present: x_S2 + x_S3 = {rep.arm_large['x_s2_s3']:.4f}")
print(f"sampled runs that look like the first case: {rep.confusion_rate:.2f} "
      f"({rep.distinct_runs} distinct samples)")
# in the LP relaxation both cases leave everything to stage two, so the
# two outputs coincide and the sampled runs cannot be told apart either
