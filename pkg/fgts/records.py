from dataclasses import dataclass
from typing import Iterable, List


@dataclass(frozen=True)
class RegretRecord:
    """One round of one run. ``cum_regret`` is the prefix sum of ``regret``."""

    run_id: str
    t: int
    regret: float
    cum_regret: float
    lam: float
    seed: int

    def to_row(self) -> dict:
        return {"run_id": self.run_id, "lambda": self.lam, "t": self.t, "regret": self.regret, "cum_regret": self.cum_regret}


def accumulate(run_id: str, regrets: Iterable[float], lam: float, seed: int) -> List[RegretRecord]:
    records = []
    total = 0.0
    for t, regret in enumerate(regrets, start=1):
        total += regret
        records.append(RegretRecord(run_id, t, float(regret), total, lam, seed))
    return records
