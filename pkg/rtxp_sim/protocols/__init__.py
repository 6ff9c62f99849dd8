"""MAC protocols: rtxp and its two baselines."""
