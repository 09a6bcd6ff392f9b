"""Experiment runners: threshold tuning sweep, three-organisation prototype
run, and the attack matrix.

All runs are deterministic in (parameters, seed); reports serialize to
byte-identical CSV/JSON for a fixed seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import adversary, puf
from .contract import Alert, ConfigError, ContractConfig
from .supplychain import PufParams, SupplyChainGraph, World


@dataclass(frozen=True)
class TuningRow:
    puf_index: int  # 1-based tuning device index
    threshold: int  # R
    tar: float
    far: float
    trr: float
    frr: float


@dataclass
class TuningReport:
    rows: list
    seed: int
    params: dict

    def to_csv(self) -> str:
        lines = ["puf_index,R,TAR,FAR,TRR,FRR"]
        for r in self.rows:
            lines.append(
                f"{r.puf_index},{r.threshold},{r.tar:.6f},{r.far:.6f},{r.trr:.6f},{r.frr:.6f}"
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "params": self.params,
                "rows": [
                    {
                        "puf_index": r.puf_index,
                        "R": r.threshold,
                        "TAR": r.tar,
                        "FAR": r.far,
                        "TRR": r.trr,
                        "FRR": r.frr,
                    }
                    for r in self.rows
                ],
            },
            sort_keys=True,
            indent=2,
        ) + "\n"


def run_tuning(
    device_count: int = 17,
    tuning_count: int = 3,
    challenges: int = 10,
    r_range: tuple[int, int] = (5, 9),
    repetitions: int = 15,
    pair_pool: int = 21000,
    width: int = 4,
    noise_rate: float = puf.DEFAULT_NOISE,
    measure_repeats: int = 5,
    seed: int = 0,
) -> TuningReport:
    """Sweep the match threshold R and measure TAR/FAR/TRR/FRR.

    Each tuning device is stimulated with challenge batches drawn fresh per
    repetition from every device's enrolled pool: its own pool feeds TAR and
    FRR, the other devices' pools feed FAR and TRR.
    """
    r_lo, r_hi = r_range
    if not 1 <= r_lo <= r_hi <= challenges:
        raise ConfigError(f"R range {r_range} outside [1, {challenges}]")
    if tuning_count > device_count:
        raise ConfigError("more tuning devices than devices")

    root = np.random.SeedSequence(seed)
    dev_ss, pool_ss, trial_ss = root.spawn(3)
    dev_rng = np.random.default_rng(dev_ss)
    pool_rng = np.random.default_rng(pool_ss)
    trial_rng = np.random.default_rng(trial_ss)

    devices = []
    for i in range(device_count):
        child = np.random.default_rng(int(dev_rng.integers(0, 2**63)))
        devices.append(
            puf.PufDevice(int(dev_rng.integers(0, 2**63)), width, noise_rate, rng=child)
        )

    # enrolled pools: noiseless ground truth per device
    pools = []
    for dev in devices:
        chal = np.unique(pool_rng.integers(0, 2**63, size=int(pair_pool * 1.01) + 16))
        pool_rng.shuffle(chal)
        chal = chal[:pair_pool]
        pools.append([(int(c), dev.ideal_response(int(c))) for c in chal])

    thresholds = list(range(r_lo, r_hi + 1))
    own: dict[tuple[int, int], list[int]] = {}
    cross: dict[tuple[int, int], list[int]] = {}
    for t in range(tuning_count):
        tuning_dev = devices[t]
        for d in range(device_count):
            for _ in range(repetitions):
                idx = trial_rng.choice(len(pools[d]), size=challenges, replace=False)
                batch = [pools[d][i] for i in idx]
                matches = sum(
                    tuning_dev.query_denoised(c, measure_repeats) == r for c, r in batch
                )
                bucket = own if d == t else cross
                for r_req in thresholds:
                    bucket.setdefault((t, r_req), []).append(int(matches >= r_req))

    rows = []
    for t in range(tuning_count):
        for r_req in thresholds:
            tar = float(np.mean(own[(t, r_req)]))
            far = float(np.mean(cross[(t, r_req)]))
            rows.append(
                TuningRow(
                    puf_index=t + 1,
                    threshold=r_req,
                    tar=tar,
                    far=far,
                    trr=1.0 - far,
                    frr=1.0 - tar,
                )
            )
    return TuningReport(
        rows=rows,
        seed=seed,
        params={
            "device_count": device_count,
            "tuning_count": tuning_count,
            "challenges": challenges,
            "r_range": list(r_range),
            "repetitions": repetitions,
            "pair_pool": pair_pool,
            "width": width,
            "noise_rate": noise_rate,
            "measure_repeats": measure_repeats,
        },
    )


MANUFACTURER, LOGISTIC, DISTRIBUTION = 0, 1, 2


def run_prototype(
    honest_devices: int = 8,
    substituted_devices: int = 3,
    seed: int = 0,
    width: int = 4,
    noise_rate: float = puf.DEFAULT_NOISE,
    challenges: int = 10,
    threshold: int = 9,
) -> dict:
    """Three-organisation chain: manufacturer -> logistic -> distribution.

    Honest case: every item passes verification at both downstream hops.
    Adversary case: the logistic party swaps each received item's device for
    a fresh, never-enrolled one; every substitute fails at distribution.
    """
    graph = SupplyChainGraph.from_edges(3, [(MANUFACTURER, LOGISTIC), (LOGISTIC, DISTRIBUTION)])
    config = ContractConfig(challenges=challenges, threshold=threshold, n_parties=3)
    params = PufParams(width=width, noise_rate=noise_rate)

    honest_world = World(graph, config, params, seed=seed)
    honest_outcomes = []
    for _ in range(honest_devices):
        inst = honest_world.new_item(MANUFACTURER)
        honest_world.ship(MANUFACTURER, LOGISTIC, inst)
        at_logistic = honest_world.deliver(LOGISTIC, inst)
        honest_world.ship(LOGISTIC, DISTRIBUTION, inst)
        at_distribution = honest_world.deliver(DISTRIBUTION, inst)
        honest_outcomes.append([_outcome(at_logistic), _outcome(at_distribution)])

    adv_world = World(graph, config, params, seed=seed + 1)
    adv_outcomes = []
    for _ in range(substituted_devices):
        inst = adv_world.new_item(MANUFACTURER)
        adv_world.ship(MANUFACTURER, LOGISTIC, inst)
        at_logistic = adv_world.deliver(LOGISTIC, inst)  # pre-substitution check
        inst.device = adv_world.create_device()  # swapped for another device
        adv_world.ship(LOGISTIC, DISTRIBUTION, inst)
        at_distribution = adv_world.deliver(DISTRIBUTION, inst)
        adv_outcomes.append(
            {
                "at_logistic": _outcome(at_logistic),
                "at_distribution": _outcome(at_distribution),
                "attributed_to": at_distribution.supplier
                if not isinstance(at_distribution, Alert)
                else None,
            }
        )

    honest_flat = [o for pair in honest_outcomes for o in pair]
    return {
        "seed": seed,
        "params": {"width": width, "noise_rate": noise_rate,
                   "challenges": challenges, "threshold": threshold},
        "honest": {
            "verifications": len(honest_flat),
            "succeeded": sum(o == "succeeded" for o in honest_flat),
            "outcomes": honest_outcomes,
        },
        "adversary": {
            "substituted": len(adv_outcomes),
            "failed_at_distribution": sum(
                o["at_distribution"] == "failed" for o in adv_outcomes
            ),
            "outcomes": adv_outcomes,
        },
    }


def _outcome(got) -> str:
    return got.kind if isinstance(got, Alert) else got.outcome


def run_attack_matrix(
    seeds: int = 100,
    byzantine_schedules: int = 100,
    base_seed: int = 0,
) -> dict:
    """Run every attack over many seeds and count expectation hits."""
    matrix: dict = {}

    def tally(name, reports):
        matrix[name] = {"runs": len(reports), "expected_met": sum(r.ok for r in reports)}

    tally("forge_in_transit",
          [adversary.attack1_forge_in_transit(base_seed + i) for i in range(seeds)])
    tally("forge_pre_crd",
          [adversary.attack2_forge_pre_crd(base_seed + i) for i in range(seeds)])
    tally("blame_supplier",
          [adversary.attack3_blame_supplier(base_seed + i) for i in range(seeds)])
    for variant in adversary.METHOD_ABUSE_VARIANTS:
        tally(f"method_abuse/{variant}",
              [adversary.attack5_method_abuse(base_seed + i, variant) for i in range(seeds)])

    per_strategy = max(1, byzantine_schedules // len(adversary.BYZANTINE_STRATEGIES))
    for strategy in adversary.BYZANTINE_STRATEGIES:
        reports = [
            adversary.attack4_byzantine(base_seed + i, strategy)
            for i in range(per_strategy)
        ]
        matrix[f"byzantine_node/{strategy}"] = {
            "runs": len(reports),
            "expected_met": sum(r.ok for r in reports),
        }

    matrix["all_expectations_met"] = all(
        v["expected_met"] == v["runs"] for k, v in matrix.items() if isinstance(v, dict)
    )
    return matrix


def far_is_monotone(report: TuningReport) -> bool:
    """Threshold property: FAR never increases as R grows, per device."""
    by_dev: dict[int, list] = {}
    for r in report.rows:
        by_dev.setdefault(r.puf_index, []).append(r)
    for rows in by_dev.values():
        rows.sort(key=lambda r: r.threshold)
        for a, b in zip(rows, rows[1:]):
            if b.far > a.far + 1e-12:
                return False
    return True
