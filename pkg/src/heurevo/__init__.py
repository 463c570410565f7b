"""heurevo: budgeted multi-agent evolution of executable heuristics for
combinatorial optimization, with a CVT-MAP-Elites behavior archive and a
deterministic replay backend for offline testing."""

__version__ = "0.1.0"
