"""Choosing the match threshold R: accept the right device, reject the rest.

Run: python demos/05_threshold_tuning.py
"""
from puftrack import experiments

report = experiments.run_tuning(
    device_count=17, tuning_count=3, challenges=10,
    r_range=(5, 9), repetitions=15, width=4, noise_rate=0.002, seed=0,
)

print("17 devices, 3 used for tuning; 10 challenges per verification\n")
print(report.to_csv())
print("TAR: own device accepted      FAR: other device accepted")
print("TRR: other device rejected    FRR: own device rejected")
print("\nFAR never increases with R:", experiments.far_is_monotone(report))
print("at R = 9 every foreign device is rejected while the own device")
print("always passes, which is why verification uses that threshold.")
