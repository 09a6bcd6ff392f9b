"""Declarative scenario files: YAML schema, loader, and runner.

Schema (all keys optional unless noted)::

    name: demo                 # scenario label
    seed: 7                    # master seed, default 0
    parties: 4                 # required: number of parties / ledger nodes
    edges: [[0, 1], [1, 2], [2, 3]]   # supplier -> buyer, one stage apart
    policy: fifo               # fifo | random | reorder
    puf: {width: 8, noise: 0.002, measure_repeats: 5}
    contract: {challenges: 10, threshold: 9}
    items:                     # honest item paths (ignored for attacks)
      - {producer: 0, path: [0, 1, 2, 3]}
    adversary:                 # optional: run one scripted attack instead
      party: 2
      attack: forge_in_transit # see adversary.ATTACKS
      strategy: equivocate     # byzantine_node only
      variant: skip_ship_item  # method_abuse only
      n_puf: 1000
"""
from __future__ import annotations

from dataclasses import dataclass

import yaml

from . import puf
from .adversary import AdversaryConfig, SafetyReport, run_attack
from .contract import Alert, ContractConfig
from .supplychain import PufParams, SupplyChainGraph, World


class ScenarioError(ValueError):
    """Scenario file rejected; message carries the file position if known."""


@dataclass
class ScenarioSpec:
    name: str
    seed: int
    graph: SupplyChainGraph
    policy: str
    puf_params: PufParams
    contract: ContractConfig
    items: list
    adversary: AdversaryConfig | None


def load_scenario(path: str) -> ScenarioSpec:
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"{path}:{mark.line + 1}" if mark else path
            raise ScenarioError(f"{where}: {exc}") from None
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    try:
        parties = int(raw["parties"])
    except KeyError:
        raise ScenarioError(f"{path}: 'parties' is required") from None
    graph = SupplyChainGraph.from_edges(parties, raw.get("edges", []))
    puf_raw = raw.get("puf", {})
    contract_raw = raw.get("contract", {})
    adv = None
    if raw.get("adversary"):
        a = raw["adversary"]
        adv = AdversaryConfig(
            controlled_party=int(a.get("party", 0)),
            attack=a.get("attack", "forge_in_transit"),
            n_puf=int(a.get("n_puf", puf.DEFAULT_CLONE_THRESHOLD)),
            strategy=a.get("strategy", "silent"),
            variant=a.get("variant", "skip_register_item"),
        )
        adv.validate(graph)
    return ScenarioSpec(
        name=str(raw.get("name", "scenario")),
        seed=int(raw.get("seed", 0)),
        graph=graph,
        policy=str(raw.get("policy", "fifo")),
        puf_params=PufParams(
            width=int(puf_raw.get("width", puf.DEFAULT_WIDTH)),
            noise_rate=float(puf_raw.get("noise", puf.DEFAULT_NOISE)),
            measure_repeats=int(puf_raw.get("measure_repeats", 5)),
        ),
        contract=ContractConfig(
            challenges=int(contract_raw.get("challenges", 10)),
            threshold=int(contract_raw.get("threshold", 9)),
            n_parties=parties,
        ),
        items=list(raw.get("items", [])),
        adversary=adv,
    )


def run_scenario(spec: ScenarioSpec, seed: int | None = None) -> dict:
    """Run a scenario; returns a JSON-serializable, reproducible report."""
    use_seed = spec.seed if seed is None else seed
    if spec.adversary is not None:
        result = run_attack(spec.adversary, use_seed)
        if isinstance(result, SafetyReport):
            body = {
                "kind": "byzantine",
                "strategy": result.strategy,
                "safe": result.ok,
                "committed": result.committed,
            }
        else:
            body = {
                "kind": "attack",
                "attack": result.name,
                "expectation_met": result.ok,
                "expected_evidence": sorted(map(list, result.expected.ledger_evidence)),
                "observed_evidence": sorted(map(list, result.observed)),
                "attributed_to": result.expected.attributed_to,
            }
        return {"scenario": spec.name, "seed": use_seed, "result": body}

    world = World(spec.graph, spec.contract, spec.puf_params,
                  seed=use_seed, policy=spec.policy)
    outcomes = []
    alerts = []
    for item_decl in spec.items:
        producer = int(item_decl["producer"])
        path = [int(p) for p in item_decl.get("path", [producer])]
        if path[0] != producer:
            raise ScenarioError(f"item path must start at its producer: {item_decl}")
        inst = world.new_item(producer)
        for hop_from, hop_to in zip(path, path[1:]):
            world.ship(hop_from, hop_to, inst)
            got = world.deliver(hop_to, inst)
            if isinstance(got, Alert):
                alerts.append({"kind": got.kind, "supplier": got.supplier,
                               "buyer": got.buyer, "item": [got.item.producer, got.item.counter]})
            else:
                outcomes.append({
                    "item": [inst.item.producer, inst.item.counter],
                    "supplier": hop_from,
                    "buyer": hop_to,
                    "outcome": got.outcome,
                    "matches": got.match_count,
                })
    return {
        "scenario": spec.name,
        "seed": use_seed,
        "verifications": outcomes,
        "alerts": alerts,
    }


def export_scenario_ledger(spec: ScenarioSpec, seed: int | None = None) -> list[str]:
    """Run the scenario and return the committed ledger as JSON lines."""
    use_seed = spec.seed if seed is None else seed
    if spec.adversary is not None:
        raise ScenarioError("ledger export is for honest scenarios")
    world = World(spec.graph, spec.contract, spec.puf_params,
                  seed=use_seed, policy=spec.policy)
    for item_decl in spec.items:
        producer = int(item_decl["producer"])
        path = [int(p) for p in item_decl.get("path", [producer])]
        inst = world.new_item(producer)
        for hop_from, hop_to in zip(path, path[1:]):
            world.ship(hop_from, hop_to, inst)
            world.deliver(hop_to, inst)
    return world.export_ledger()
