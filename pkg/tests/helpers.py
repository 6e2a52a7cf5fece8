"""Independent oracles and small builders shared across the test suite.

The oracles here are deliberately written without numpy and without reusing
engine code paths: they are the second route every dual-route check compares
against.
"""

from __future__ import annotations

from datetime import datetime, timezone

from seem.build import Memory
from seem.gateway import MockGateway
from seem.model import Passage, RetrievalConfig


def ppr_oracle(num_nodes: int, edges: set[tuple[int, int]], seeds: dict[int, float],
               damping: float, tol: float, max_iters: int) -> list[float]:
    """Dict-and-loop power iteration: same pinned protocol, independent code."""
    neighbors: dict[int, list[int]] = {i: [] for i in range(num_nodes)}
    for a, b in edges:
        neighbors[a].append(b)
        neighbors[b].append(a)
    s = [seeds.get(i, 0.0) for i in range(num_nodes)]
    x = list(s)
    for _ in range(max_iters):
        dangling_mass = sum(x[i] for i in range(num_nodes) if not neighbors[i])
        nxt = [0.0] * num_nodes
        for i in range(num_nodes):
            if neighbors[i]:
                share = x[i] / len(neighbors[i])
                for j in neighbors[i]:
                    nxt[j] += share
        x_new = [
            (1.0 - damping) * s[i] + damping * (nxt[i] + dangling_mass * s[i])
            for i in range(num_nodes)
        ]
        delta = sum(abs(x_new[i] - x[i]) for i in range(num_nodes))
        x = x_new
        if delta < tol:
            break
    return x


def rpe_oracle(p_ret: list[str], frames: list, cap: int, chrono_rank) -> list[str]:
    """Brute-force enumerator of the stated expansion priority.

    Builds the full (frame rank, chronological position) candidate list, then
    admits passages one by one until the cap; final order is chronological.
    """
    assert cap >= len(p_ret)
    candidates = []
    for rank, frame in enumerate(frames):
        for pid in sorted(frame.provenance.passage_ids, key=chrono_rank):
            candidates.append((rank, chrono_rank(pid), pid))
    candidates.sort()
    final = list(p_ret)
    for _, _, pid in candidates:
        if len(final) >= cap:
            break
        if pid not in final:
            final.append(pid)
    return sorted(set(final), key=chrono_rank)


def make_passage(session: str, turn: int, text: str, speaker: str = "Speaker",
                 when: str | None = None) -> Passage:
    timestamp = None
    if when is not None:
        timestamp = datetime.fromisoformat(when)
        if timestamp.tzinfo is None:
            timestamp = timestamp.replace(tzinfo=timezone.utc)
    return Passage(
        passage_id=f"{session}:{turn}",
        session_id=session,
        turn_index=turn,
        speaker=speaker,
        text=text,
        timestamp=timestamp,
    )


def memory_from_texts(rows: list[tuple], dim: int = 64, seed: int = 0,
                      config: RetrievalConfig | None = None) -> Memory:
    """Build a Memory from (session, turn, text[, speaker[, iso-when]]) rows."""
    memory = Memory(MockGateway(dim=dim, seed=seed), config)
    for row in rows:
        memory.ingest_passage(make_passage(*row))
    return memory
