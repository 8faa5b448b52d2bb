"""Multi-agent recurrent PPO with a cross-agent interleaved critic.

Centralized training, decentralized execution: one parameter-shared recurrent
actor drives every agent, one recurrent critic is trained on a sequence that
interleaves all agents' inputs time step by time step, and advantages mix the
team's TD errors through a tunable weight. Five ablation variants strip those
pieces out one at a time.
"""

from marppo.nn import ContractError, NumericError

__version__ = "0.1.0"

__all__ = ["ContractError", "NumericError", "__version__"]
