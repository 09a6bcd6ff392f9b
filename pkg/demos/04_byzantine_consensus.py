"""One misbehaving replica against three honest ones, many hostile schedules.

Run: python demos/04_byzantine_consensus.py
"""
from puftrack import adversary

SCHEDULES = 25

print(f"{SCHEDULES} randomized schedules per strategy, N=4, f=1\n")
print(f"{'strategy':<18} {'safe':>5} {'completed':>10} {'min log len':>12}")
for strategy in adversary.BYZANTINE_STRATEGIES:
    safe = completed = 0
    min_len = None
    for seed in range(SCHEDULES):
        r = adversary.attack4_byzantine(seed, strategy, policy="reorder")
        safe += r.ok
        completed += r.workload_completed
        shortest = min(r.honest_log_lengths)
        min_len = shortest if min_len is None else min(min_len, shortest)
    print(f"{strategy:<18} {safe:>3}/{SCHEDULES} {completed:>8}/{SCHEDULES} {min_len:>12}")

print("""
safe      = honest replicas agreed on an identical prefix, every committed
            transaction carried a valid signature, and no key was written twice
completed = the honest tracking workload (register, ship, verify) committed
            despite the misbehaving replica""")
