"""Expected-signature estimation toolkit.

Truncated path signatures of discretely observed streams, expected-signature
estimators with a martingale control-variate correction, feasible long-run
covariance estimation, signature-based pricing/hedging, controlled linear
regression, and a Monte-Carlo experiment harness exposed through a FastAPI
service and a thin CLI client.
"""

__version__ = "0.1.0"
