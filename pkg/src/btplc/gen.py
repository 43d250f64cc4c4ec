"""Seeded random trees and leaf scripts for oracle testing."""
from __future__ import annotations

import random
from dataclasses import dataclass

from .core import NodeKind, NodeSpec, NodeStatus, TreeSpec


@dataclass
class GeneratedCase:
    spec: TreeSpec
    scripts: dict[str, list[NodeStatus]]


class RandomTreeGen:
    """Same seed, same tree and scripts.

    Action scripts are a run of Running entries followed by one terminal
    verdict (clamped thereafter); condition scripts are free Success/Failure
    words. Control ids follow the parser's pre-order numbering so generated
    trees round-trip through the DSL unchanged.
    """

    def __init__(
        self,
        seed: int,
        max_depth: int = 4,
        max_children: int = 3,
        script_len: int = 6,
        max_nodes: int = 20,
    ):
        self.seed = seed
        self.max_depth = max_depth
        self.max_children = max_children
        self.script_len = script_len
        self.max_nodes = max_nodes

    def generate(self, index: int = 0) -> GeneratedCase:
        rng = random.Random(self.seed * 1_000_003 + index)
        nodes: dict[str, NodeSpec] = {}
        scripts: dict[str, list[NodeStatus]] = {}
        counters = {"control": 0, "leaf": 0}

        def new_leaf() -> str:
            counters["leaf"] += 1
            nid = f"leaf{counters['leaf']}"
            if rng.random() < 0.5:
                script = [
                    NodeStatus.SUCCESS if rng.random() < 0.5 else NodeStatus.FAILURE
                    for _ in range(rng.randint(1, self.script_len))
                ]
                nodes[nid] = NodeSpec(nid, NodeKind.CONDITION, (), nid)
            else:
                busy = rng.randint(0, self.script_len - 1)
                verdict = (
                    NodeStatus.SUCCESS if rng.random() < 0.6 else NodeStatus.FAILURE
                )
                script = [NodeStatus.RUNNING] * busy + [verdict]
                nodes[nid] = NodeSpec(nid, NodeKind.ACTION, (), nid)
            scripts[nid] = script
            return nid

        def build(depth: int, budget: list[int]) -> str:
            budget[0] -= 1
            if depth >= self.max_depth or budget[0] <= 1 or rng.random() < 0.3:
                return new_leaf()
            kind = NodeKind.SEQUENCE if rng.random() < 0.5 else NodeKind.FALLBACK
            counters["control"] += 1
            nid = f"{kind.value}_{counters['control']}"
            n_children = rng.randint(1, self.max_children)
            children = tuple(build(depth + 1, budget) for _ in range(n_children))
            nodes[nid] = NodeSpec(nid, kind, children)
            return nid

        root = build(0, [self.max_nodes])
        return GeneratedCase(TreeSpec(f"t{index}", nodes, root), scripts)


def script_at(script: list[NodeStatus], cycle: int) -> NodeStatus:
    return script[min(cycle, len(script) - 1)]
