"""Device identity in five minutes: responses, noise, tampering, cloning.

Run: python demos/01_puf_basics.py
"""
import numpy as np

from puftrack import puf

rng = np.random.default_rng(0)
device = puf.PufDevice(device_seed=42, response_width=8, noise_rate=0.002,
                       rng=np.random.default_rng(1))

print("== responses are a stable function of the device seed ==")
for challenge in (3, 1_000_003):
    print(f"  challenge {challenge:>9}: response {device.ideal_response(challenge):#04x}")
print("  re-asking gives the same answers:",
      all(device.ideal_response(c) == device.ideal_response(c) for c in range(100)))

print("\n== measurements are noisy; majority voting removes the noise ==")
noisy = puf.PufDevice(42, 8, noise_rate=0.05, rng=np.random.default_rng(2))
raw_errors = sum(noisy.query(c) != noisy.ideal_response(c) for c in range(2000))
maj_errors = sum(noisy.query_denoised(c, repeats=5) != noisy.ideal_response(c) for c in range(2000))
print(f"  single-shot errors over 2000 queries: {raw_errors}")
print(f"  majority-of-5 errors over 2000 queries: {maj_errors}")

print("\n== tampering swaps the function inside the same package ==")
victim = puf.PufDevice(42, 8, 0.0, rng=np.random.default_rng(3))
tampered = puf.tamper(victim)
agree = sum(device.ideal_response(c) == tampered.ideal_response(c) for c in range(10_000))
print(f"  collisions with the original over 10000 challenges: {agree}"
      f" (chance rate ~ {10_000 * 2**-8:.0f})")

print("\n== clones replay what they saw and guess everything else ==")
observed = [puf.ChallengeResponsePair(c, device.ideal_response(c)) for c in range(1000)]
fake = puf.clone(observed, threshold=1000, fresh_seed=777, noise_rate=0.0)
replayed = sum(fake.query(c) == device.ideal_response(c) for c in range(1000))
guessed = sum(fake.query(c) == device.ideal_response(c) for c in range(1000, 2000))
print(f"  on observed challenges the clone is perfect: {replayed}/1000")
print(f"  on unseen challenges it is a stranger: {guessed}/1000")
try:
    puf.clone(observed[:10], threshold=1000, fresh_seed=7)
except puf.CloneDenied as exc:
    print(f"  with too few observations cloning is denied: {exc}")
