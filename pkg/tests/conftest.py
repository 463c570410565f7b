import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def make_candidate(cid, loss, generation=0, behavior_norm=None, source="def f():\n    return 0\n",
                   behavior_raw=None, strategy=""):
    """Small helper used across archive/population tests."""
    from heurevo.core import EvaluatedCandidate, FitnessScore, Heuristic

    return EvaluatedCandidate(
        heuristic=Heuristic(id=cid, source=source, strategy_text=strategy,
                            generation=generation),
        fitness=FitnessScore(loss),
        behavior_raw=list(behavior_raw if behavior_raw is not None
                          else (behavior_norm or [0.0] * 11)),
        behavior_norm=list(behavior_norm) if behavior_norm is not None else None,
        eval_seconds=1e-6,
    )
