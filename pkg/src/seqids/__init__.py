"""Attack-action prediction from IDS alerts and server statistics.

Offline and online sequence labeling with hidden Markov models, a small
LSTM and a random forest, plus the simulator and evaluation harness used to
compare them.
"""

__version__ = "0.1.0"

from .actions import AttackAction, AttackType  # noqa: E402
from .forest import RandomForest  # noqa: E402
from .hmm import BaumWelchHMM, HmmModel, SupervisedHMM  # noqa: E402
from .lstm import LSTMTagger  # noqa: E402
from .metrics import MetricSet, compute_metrics  # noqa: E402
from .preprocess import AttributeReducer, Symbolizer  # noqa: E402
from .sim import SimConfig, generate_dataset  # noqa: E402

__all__ = [
    "AttackAction", "AttackType", "AttributeReducer", "BaumWelchHMM", "HmmModel",
    "LSTMTagger", "MetricSet", "RandomForest", "SimConfig", "SupervisedHMM", "Symbolizer",
    "compute_metrics", "generate_dataset",
]
