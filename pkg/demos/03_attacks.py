"""What each attack leaves behind on the ledger.

Run: python demos/03_attacks.py
"""
from puftrack import adversary

SEED = 1


def show(title, report):
    print(f"\n== {title} ==")
    print(f"  expected detection: {report.expected.detection},"
          f" attributed to party {report.expected.attributed_to}")
    for tag, supplier, buyer in sorted(report.observed):
        print(f"  ledger: {tag} (supplier {supplier} -> buyer {buyer})")
    print(f"  expectation met: {report.ok}")


show("tamper while in transit (after own intake check)",
     adversary.attack1_forge_in_transit(SEED))

show("replay clone substituted in transit",
     adversary.attack1_forge_in_transit(SEED, clone_variant=True))

show("tamper before enrolment: the forged function IS the enrolled one",
     adversary.attack2_forge_pre_crd(SEED))

show("tamper between enrolment and first shipment",
     adversary.attack2_forge_pre_crd(SEED, variant="post_register"))

show("tamper on receipt to frame the honest supplier",
     adversary.attack3_blame_supplier(SEED))

for variant in adversary.METHOD_ABUSE_VARIANTS:
    show(f"method abuse: {variant}", adversary.attack5_method_abuse(SEED, variant))

print("\n== forged transaction signatures ==")
print("  rejected by every node:", adversary.forged_signature_rejected(SEED))
