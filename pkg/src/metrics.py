import time
from dataclasses import dataclass
from typing import Dict, Optional


@dataclass
class MoveStats:
    move: str
    proposed: int = 0
    accepted: int = 0

    @property
    def rate(self) -> Optional[float]:
        return self.accepted / self.proposed if self.proposed else None


class AcceptanceTracker:
    """
    Proposal/acceptance counters per move type plus sweep timing for one chain.
    Gibbs moves count as proposals that are always accepted.
    """

    def __init__(self):
        self.moves: Dict[str, MoveStats] = {}
        self.sweeps = 0
        self._sweep_seconds = 0.0
        self._sweep_started: Optional[float] = None

    def track_proposal(self, move: str, accepted: int, proposed: int = 1):
        stats = self.moves.setdefault(move, MoveStats(move))
        stats.proposed += int(proposed)
        stats.accepted += int(accepted)

    def acceptance_rate(self, move: str) -> Optional[float]:
        stats = self.moves.get(move)
        return stats.rate if stats else None

    def start_sweep(self):
        self._sweep_started = time.perf_counter()

    def end_sweep(self):
        if self._sweep_started is not None:
            self._sweep_seconds += time.perf_counter() - self._sweep_started
            self._sweep_started = None
        self.sweeps += 1

    def merge(self, other: "AcceptanceTracker") -> "AcceptanceTracker":
        merged = AcceptanceTracker()
        for tracker in (self, other):
            for stats in tracker.moves.values():
                merged.track_proposal(stats.move, stats.accepted, stats.proposed)
            merged.sweeps += tracker.sweeps
            merged._sweep_seconds += tracker._sweep_seconds
        return merged

    def get_metrics_snapshot(self) -> Dict[str, object]:
        return {
            "sweeps": self.sweeps,
            "seconds_per_sweep": round(self._sweep_seconds / self.sweeps, 6) if self.sweeps else None,
            "acceptance": {
                name: (round(stats.rate, 4) if stats.rate is not None else None)
                for name, stats in sorted(self.moves.items())
            },
            "proposals": {name: stats.proposed for name, stats in sorted(self.moves.items())},
        }
